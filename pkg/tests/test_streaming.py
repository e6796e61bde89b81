import math

import numpy as np
import pytest

from cdconv import (EventKernelParams, EventStream, build_event_edges,
                    dual_equivalence_check, event_conv_forward, run_streaming,
                    stream_init, stream_on_input, stream_query_output)
from helpers import event_instance


def single_pixel_params():
    return EventKernelParams((1, 1), 1, 1.0, [[math.log(2.0)]], [[[[1.0]]]])


class TestStreamState:
    def test_init_is_zero_and_repeatable(self):
        params = single_pixel_params()
        a = stream_init((4, 4), params)
        b = stream_init((4, 4), params)
        assert np.all(a.z == 0.0) and np.all(a.tau == 0.0)
        np.testing.assert_array_equal(a.z, b.z)
        assert np.all(stream_query_output(a, 0.0, 1, 1) == 0.0)

    def test_state_size_formula(self):
        rng = np.random.default_rng(60)
        h, w, m_v, q, p = 5, 7, 3, 4, 2
        params = EventKernelParams((3, 3), 1, 1.0,
                                   rng.uniform(0.5, 2.0, (9, m_v)),
                                   rng.standard_normal((9, m_v, q, p)))
        state = stream_init((h, w), params)
        assert state.num_reals == h * w * (9 * m_v * q + 1)

    def test_memory_does_not_grow_with_events(self):
        params = single_pixel_params()
        state = stream_init((1, 1), params)
        before = state.num_reals
        for t in range(100):
            stream_on_input(state, float(t), 0, 0, [1.0])
        assert state.num_reals == before
        assert state.z.shape == (1, 1, 1, 1, 1)


class TestStreamOnInput:
    def test_first_event_sets_unit_state(self):
        state = stream_init((1, 1), single_pixel_params())
        stream_on_input(state, 0.0, 0, 0, [1.0])
        assert state.z[0, 0, 0, 0, 0] == 1.0

    def test_decayed_accumulation(self):
        # 1 + exp(-ln 2) * 1 = 1.5
        state = stream_init((1, 1), single_pixel_params())
        stream_on_input(state, 0.0, 0, 0, [1.0])
        stream_on_input(state, 1.0, 0, 0, [1.0])
        assert state.z[0, 0, 0, 0, 0] == 1.5

    def test_identical_timestamps_add_without_decay(self):
        state = stream_init((1, 1), single_pixel_params())
        stream_on_input(state, 5.0, 0, 0, [1.0])
        stream_on_input(state, 5.0, 0, 0, [1.0])
        assert state.z[0, 0, 0, 0, 0] == 2.0

    def test_time_reversal_rejected(self):
        state = stream_init((1, 1), single_pixel_params())
        stream_on_input(state, 3.0, 0, 0, [1.0])
        with pytest.raises(ValueError):
            stream_on_input(state, 2.0, 0, 0, [1.0])


class TestStreamQueryOutput:
    def test_matches_batch_analytic_value(self):
        state = stream_init((1, 1), single_pixel_params())
        stream_on_input(state, 0.0, 0, 0, [1.0])
        stream_on_input(state, 1.0, 0, 0, [1.0])
        out = stream_query_output(state, 2.0, 0, 0)
        np.testing.assert_allclose(out, [0.75], atol=1e-15)

    def test_query_is_pure(self):
        state = stream_init((1, 1), single_pixel_params())
        stream_on_input(state, 0.0, 0, 0, [1.0])
        z_before = state.z.copy()
        tau_before = state.tau.copy()
        first = stream_query_output(state, 4.0, 0, 0)
        second = stream_query_output(state, 4.0, 0, 0)
        np.testing.assert_array_equal(first, second)
        np.testing.assert_array_equal(state.z, z_before)
        np.testing.assert_array_equal(state.tau, tau_before)

    def test_out_of_grid_output_pixel_rejected(self):
        state = stream_init((4, 4), single_pixel_params())
        with pytest.raises(ValueError):
            stream_query_output(state, 0.0, 4, 0)


class TestDualEquivalence:
    def test_analytic_case_is_exact(self):
        inputs = EventStream((1, 1), [0.0, 1.0], [0, 0], [0, 0],
                             features=[[1.0], [1.0]])
        outputs = EventStream((1, 1), [2.0], [0], [0])
        assert dual_equivalence_check(inputs, outputs,
                                      single_pixel_params()) <= 1e-15

    def test_empty_output_stream(self):
        inputs = EventStream((1, 1), [0.0], [0], [0], features=[[1.0]])
        outputs = EventStream((1, 1), [], [], [])
        assert dual_equivalence_check(inputs, outputs,
                                      single_pixel_params()) == 0.0

    def test_fuzzed_streams_agree(self):
        rng = np.random.default_rng(61)
        for stride in (1, 2, 1, 2):
            inputs, outputs, params = event_instance(
                rng, grid=(32, 32), num_in=1000, num_out=200, stride=stride,
                m_v=2, q=4, p=8, t_tilde=500.0, t_span=1.0e4)
            assert dual_equivalence_check(inputs, outputs, params) <= 1e-9

    def test_interleaving_matches_bulk_ingest(self):
        rng = np.random.default_rng(62)
        inputs, outputs, params = event_instance(rng, grid=(8, 8), num_in=100,
                                                 num_out=0)
        one_by_one = stream_init(inputs.grid, params)
        for k in range(inputs.num_events):
            stream_on_input(one_by_one, inputs.times[k], int(inputs.xs[k]),
                            int(inputs.ys[k]), inputs.features[k])
        # run_streaming ingests the same events while walking output events
        late = EventStream((8, 8), [inputs.times[-1]], [0], [0])
        streamed = run_streaming(inputs, late, params)
        probe = stream_query_output(one_by_one, inputs.times[-1], 0, 0)
        np.testing.assert_array_equal(streamed[0], probe)


class TestCropWindow:
    def test_cropped_discrepancy_shrinks_with_window(self):
        rng = np.random.default_rng(63)
        inputs, outputs, params = event_instance(
            rng, grid=(16, 16), num_in=400, num_out=80, stride=1, m_v=2,
            q=3, p=4, t_tilde=200.0, t_span=4000.0, lam_lo=1.0, lam_hi=2.0)
        streamed = run_streaming(inputs, outputs, params)
        gaps = []
        for crop in (1.0, 2.0, 4.0, 8.0):
            edges = build_event_edges(inputs, outputs, params.window,
                                      params.stride, params.t_tilde,
                                      crop_window=crop)
            cropped = event_conv_forward(edges, inputs.features, params)
            gaps.append(np.abs(cropped - streamed).max())
        for wider, narrower in zip(gaps[1:], gaps[:-1]):
            assert wider <= narrower + 1e-12
        assert gaps[-1] <= 1e-2 * max(gaps[0], 1e-300)
