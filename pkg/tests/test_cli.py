import math

import numpy as np
import pytest

from cdconv import EventKernelParams, LIFConfig, storage
from cdconv.cli import main

CLOUD_FIXTURE = "0\n0.4\n0.9\n2\n"


@pytest.fixture
def cloud_file(tmp_path):
    path = tmp_path / "cloud.csv"
    path.write_text(CLOUD_FIXTURE)
    return str(path)


class TestSampleCommand:
    def test_rejection_fixture(self, tmp_path, cloud_file, capsys):
        out = tmp_path / "sel.txt"
        rc = main(["sample", "--input", cloud_file, "--method", "rejection",
                   "--radius", "1.0", "--output", str(out)])
        assert rc == 0
        assert "selected: 2" in capsys.readouterr().out
        assert out.read_text() == "0\n3\n"
        d_min = [float(v) for v in
                 (tmp_path / "sel.txt.dmin.csv").read_text().split()]
        assert d_min == [0.0, 0.4, 0.9, 0.0]

    def test_combined_fixture(self, tmp_path, cloud_file):
        out = tmp_path / "sel.txt"
        rc = main(["sample", "--input", cloud_file, "--method", "approx-ifp-rej",
                   "--radius", "1.0", "--count", "3", "--output", str(out)])
        assert rc == 0
        assert out.read_text() == "0\n3\n2\n"

    def test_ifp_count_zero_is_usage_error(self, tmp_path, cloud_file):
        rc = main(["sample", "--input", cloud_file, "--method", "ifp",
                   "--count", "0", "--output", str(tmp_path / "x.txt")])
        assert rc == 2

    def test_missing_radius_is_usage_error(self, tmp_path, cloud_file):
        rc = main(["sample", "--input", cloud_file, "--method", "rejection",
                   "--output", str(tmp_path / "x.txt")])
        assert rc == 2

    def test_missing_count_is_usage_error(self, tmp_path, cloud_file):
        rc = main(["sample", "--input", cloud_file, "--method", "ifp",
                   "--output", str(tmp_path / "x.txt")])
        assert rc == 2


@pytest.fixture
def conv_files(tmp_path):
    (tmp_path / "a.csv").write_text("0.0\n1.0\n")
    (tmp_path / "b.csv").write_text("0.5\n")
    (tmp_path / "f.csv").write_text("2.0\n3.0\n")
    storage.write_tensor(tmp_path / "theta.bin", np.ones((2, 1, 1)))
    return tmp_path


class TestConvCommand:
    def base_args(self, tmp_path):
        return ["conv", "--cloud-in", str(tmp_path / "a.csv"),
                "--cloud-out", str(tmp_path / "b.csv"),
                "--features", str(tmp_path / "f.csv"),
                "--theta", str(tmp_path / "theta.bin"),
                "--radius", "1.0", "--order", "1",
                "--output", str(tmp_path / "out.csv")]

    def test_analytic_fixture(self, conv_files, capsys):
        rc = main(self.base_args(conv_files))
        assert rc == 0
        text = capsys.readouterr().out
        assert "edges: 2" in text
        assert float((conv_files / "out.csv").read_text().strip()) == 4.5

    def test_weighted_fixture(self, conv_files):
        rc = main(self.base_args(conv_files) + ["--weighted"])
        assert rc == 0
        assert float((conv_files / "out.csv").read_text().strip()) == 2.25

    def test_auto_ordering_prints_left_to_right(self, tmp_path, capsys):
        # Q=1 < P=2 and S_out=1 < S=2: the down-sampling regime
        (tmp_path / "a.csv").write_text("0.0\n1.0\n")
        (tmp_path / "b.csv").write_text("0.5\n")
        (tmp_path / "f.csv").write_text("2.0\n3.0\n")
        storage.write_tensor(tmp_path / "theta.bin", np.ones((2, 1, 2)))
        rc = main(["conv", "--cloud-in", str(tmp_path / "a.csv"),
                   "--cloud-out", str(tmp_path / "b.csv"),
                   "--features", str(tmp_path / "f.csv"),
                   "--theta", str(tmp_path / "theta.bin"),
                   "--radius", "1.0", "--order", "1", "--ordering", "auto",
                   "--output", str(tmp_path / "out.csv")])
        assert rc == 0
        assert "ordering: left-to-right" in capsys.readouterr().out

    def test_shape_mismatch_is_usage_error(self, conv_files):
        args = self.base_args(conv_files)
        args[args.index("--order") + 1] = "2"  # M=3 basis vs 2 blocks
        assert main(args) == 2


def write_event_fixture(tmp_path):
    events = tmp_path / "events.csv"
    events.write_text("%1,1\n0,0,0,1\n1,0,0,1\n2,0,0,0\n")
    params = EventKernelParams((1, 1), 1, 1.0, [[math.log(2.0)]],
                               np.array([[[[1.0], [0.0]]]]))
    cfg = LIFConfig(window=(1, 1), stride=1, t_tilde=1.0e9, v_thresh=2.9,
                    v_reset=0.0)
    config = tmp_path / "sim.cfg"
    storage.write_event_sim_config(config, cfg, params)
    return str(events), str(config)


class TestEventSimCommand:
    def test_analytic_fixture_batch_and_streaming(self, tmp_path):
        events, config = write_event_fixture(tmp_path)
        for extra, name in (([], "batch.csv"), (["--streaming"], "stream.csv")):
            rc = main(["event-sim", "--events", events, "--config", config,
                       "--output", str(tmp_path / name)] + extra)
            assert rc == 0
            row = (tmp_path / name).read_text().strip().split(",")
            assert [float(v) for v in row] == [2.0, 0.0, 0.0, 0.75]

    def test_infinite_threshold_empty_output(self, tmp_path):
        events, config = write_event_fixture(tmp_path)
        params = EventKernelParams((1, 1), 1, 1.0, [[math.log(2.0)]],
                                   np.array([[[[1.0], [0.0]]]]))
        cfg = LIFConfig(window=(1, 1), stride=1, t_tilde=1.0e9,
                        v_thresh=math.inf, v_reset=0.0)
        storage.write_event_sim_config(tmp_path / "sim.cfg", cfg, params)
        rc = main(["event-sim", "--events", events, "--config", config,
                   "--output", str(tmp_path / "out.csv")])
        assert rc == 0
        assert (tmp_path / "out.csv").read_text() == ""

    def test_paths_agree_on_random_fixture(self, tmp_path):
        rng = np.random.default_rng(80)
        n = 400
        times = np.sort(rng.integers(0, 20000, n))
        from cdconv import EventStream
        stream = EventStream((16, 16), times.astype(float),
                             rng.integers(0, 16, n), rng.integers(0, 16, n),
                             polarity=rng.integers(0, 2, n))
        storage.write_event_stream(tmp_path / "events.csv", stream)
        params = EventKernelParams((3, 3), 2, 2000.0,
                                   rng.uniform(0.5, 2.0, (9, 2)),
                                   rng.standard_normal((9, 2, 2, 4)))
        cfg = LIFConfig(window=(3, 3), stride=2, t_tilde=2000.0, v_thresh=1.2,
                        v_reset=0.0)
        storage.write_event_sim_config(tmp_path / "sim.cfg", cfg, params)
        outputs = {}
        for extra, name in (([], "batch.csv"), (["--streaming"], "stream.csv")):
            rc = main(["event-sim", "--events", str(tmp_path / "events.csv"),
                       "--config", str(tmp_path / "sim.cfg"),
                       "--output", str(tmp_path / name)] + extra)
            assert rc == 0
            rows = [[float(v) for v in line.split(",")]
                    for line in (tmp_path / name).read_text().splitlines()]
            outputs[name] = np.asarray(rows)
        assert outputs["batch.csv"].shape == outputs["stream.csv"].shape
        assert outputs["batch.csv"].size > 0
        features = outputs["batch.csv"][:, 3:]
        diff = np.abs(features - outputs["stream.csv"][:, 3:]).max()
        assert diff <= 1e-9 * max(1.0, np.abs(features).max())

    def test_format_error_is_usage_error(self, tmp_path):
        events, config = write_event_fixture(tmp_path)
        (tmp_path / "sim.cfg").write_text("kind=event_sim\n")
        rc = main(["event-sim", "--events", events, "--config", config,
                   "--output", str(tmp_path / "out.csv")])
        assert rc == 2


class TestVerifyCommand:
    @pytest.mark.parametrize("suite", ["dual", "gradcheck", "sampling", "oracle"])
    def test_suites_pass(self, suite, capsys):
        rc = main(["verify", "--suite", suite, "--seed", "1", "--trials", "3"])
        text = capsys.readouterr().out
        assert rc == 0
        assert "result: pass" in text
        assert "trial 0:" in text

    def test_unknown_suite_is_usage_error(self, capsys):
        assert main(["verify", "--suite", "nonsense"]) == 2

    def test_perturbation_hook_flips_exit_code(self, monkeypatch):
        monkeypatch.setenv("CDCONV_VERIFY_PERTURB", "1.0")
        rc = main(["verify", "--suite", "oracle", "--seed", "1", "--trials", "2"])
        assert rc == 1

    def test_deterministic_given_seed(self, capsys):
        main(["verify", "--suite", "dual", "--seed", "7", "--trials", "2"])
        first = capsys.readouterr().out
        main(["verify", "--suite", "dual", "--seed", "7", "--trials", "2"])
        assert capsys.readouterr().out == first


class TestBenchCommand:
    def test_reps_zero_prints_shape_only(self, capsys):
        rc = main(["bench", "--s", "64", "--s-out", "32", "--q", "4", "--p", "4",
                   "--m", "4", "--k", "3", "--batch", "2", "--reps", "0"])
        text = capsys.readouterr().out
        assert rc == 0
        assert "shape: M=4 Q=4 P=4 S=64 S_out=32 k=3 batch=2" in text
        assert "edges: 192" in text  # 2 * 32 * 3
        assert "forward_ms" not in text

    def test_small_bench_runs(self, capsys):
        rc = main(["bench", "--s", "64", "--s-out", "64", "--q", "4", "--p", "4",
                   "--m", "4", "--k", "3", "--batch", "2", "--reps", "1"])
        text = capsys.readouterr().out
        assert rc == 0
        assert "forward_ms" in text
        assert "left-to-right" in text and "right-to-left" in text
