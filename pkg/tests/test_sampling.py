import numpy as np
import pytest

from cdconv import (MaxDistanceQueue, PointCloud, QueueEmptyError,
                    approx_ifp_no_rejection, approx_ifp_sample,
                    approx_ifp_with_rejection, ball_search, build_grid_index,
                    ifp_sample, rejection_sample)
from cdconv.reference import greedy_farthest_reference

FIXTURE = PointCloud([0.0, 0.4, 0.9, 2.0])


def self_ball(cloud, radius):
    return ball_search(build_grid_index(cloud, radius), cloud, radius)


class TestIfpSample:
    def test_hand_trace(self):
        # first pick is index 0 (infinity tie), then arg max d_min = 2.0 at 3
        assert ifp_sample(FIXTURE, 2).indices.tolist() == [0, 3]

    def test_full_count_is_permutation_starting_at_zero(self):
        result = ifp_sample(FIXTURE, 4)
        assert result.indices[0] == 0
        assert sorted(result.indices.tolist()) == [0, 1, 2, 3]

    def test_matches_greedy_oracle(self):
        rng = np.random.default_rng(10)
        cloud = PointCloud(rng.uniform(0.0, 1.0, (50, 2)))
        result = ifp_sample(cloud, 10)
        assert result.indices.tolist() == greedy_farthest_reference(cloud.coords, 10)

    def test_selected_points_have_zero_dmin(self):
        result = ifp_sample(FIXTURE, 3)
        assert np.all(result.d_min[result.indices] == 0.0)

    def test_count_out_of_range(self):
        with pytest.raises(ValueError):
            ifp_sample(FIXTURE, 0)
        with pytest.raises(ValueError):
            ifp_sample(FIXTURE, 5)


class TestApproxIfpSample:
    def test_hand_trace(self):
        queue = MaxDistanceQueue(np.full(4, np.inf))
        result = approx_ifp_sample(FIXTURE, 2, self_ball(FIXTURE, 1.0), queue)
        assert result.indices.tolist() == [0, 3]

    def test_count_one(self):
        result = approx_ifp_no_rejection(FIXTURE, 1, self_ball(FIXTURE, 1.0))
        assert result.indices.tolist() == [0]

    def test_all_pairs_neighborhood_degenerates_to_exact_ifp(self):
        rng = np.random.default_rng(11)
        cloud = PointCloud(rng.uniform(0.0, 1.0, (40, 3)))
        nb = self_ball(cloud, 4.0)  # covers every pair in the unit cube
        exact = ifp_sample(cloud, 15)
        approx = approx_ifp_no_rejection(cloud, 15, nb)
        assert approx.indices.tolist() == exact.indices.tolist()

    def test_empty_queue_is_state_error(self):
        queue = MaxDistanceQueue(np.full(4, np.inf))
        for _ in range(4):
            queue.pop()
        with pytest.raises(QueueEmptyError):
            queue.pop()


class TestMaxDistanceQueue:
    def test_infinity_ties_pop_lowest_index(self):
        queue = MaxDistanceQueue(np.full(3, np.inf))
        assert queue.pop() == 0
        assert queue.pop() == 1

    def test_update_only_decreases(self):
        queue = MaxDistanceQueue([1.0, 2.0])
        queue.update(0, 5.0)  # ignored, keys never grow
        assert queue.pop() == 1
        assert queue.pop() == 0

    def test_stale_entries_skipped(self):
        queue = MaxDistanceQueue([3.0, 2.0])
        queue.update(0, 1.0)
        assert queue.pop() == 1
        assert queue.pop() == 0


class TestRejectionSample:
    def test_hand_trace(self):
        result = rejection_sample(FIXTURE, 1.0)
        assert result.indices.tolist() == [0, 3]
        np.testing.assert_allclose(result.d_min, [0.0, 0.4, 0.9, 0.0])

    def test_single_point(self):
        result = rejection_sample(PointCloud([5.0]), 2.0)
        assert result.indices.tolist() == [0]
        assert result.d_min.tolist() == [0.0]

    def test_separation_and_coverage(self):
        rng = np.random.default_rng(12)
        for trial in range(10):
            dim = 2 if trial % 2 == 0 else 3
            cloud = PointCloud(rng.uniform(0.0, 1.0, (60, dim)))
            radius = float(rng.uniform(0.15, 0.35))
            sel = cloud.coords[rejection_sample(cloud, radius).indices]
            r2 = radius * radius
            if sel.shape[0] > 1:
                pair = ((sel[:, None, :] - sel[None, :, :]) ** 2).sum(axis=2)
                pair += np.diag(np.full(sel.shape[0], np.inf))
                assert pair.min() >= r2
            cover = ((cloud.coords[:, None, :] - sel[None, :, :]) ** 2).sum(axis=2)
            assert cover.min(axis=1).max() <= r2

    def test_empty_cloud_is_error(self):
        with pytest.raises(ValueError):
            rejection_sample(PointCloud(np.zeros((0, 2))), 1.0)


class TestApproxIfpWithRejection:
    def test_hand_trace(self):
        result = approx_ifp_with_rejection(FIXTURE, 3, 1.0)
        assert result.indices.tolist() == [0, 3, 2]

    def test_count_equal_to_rejection_size(self):
        rejection = rejection_sample(FIXTURE, 1.0)
        combined = approx_ifp_with_rejection(FIXTURE, 2, 1.0)
        assert combined.indices.tolist() == rejection.indices.tolist()
        np.testing.assert_array_equal(combined.d_min, rejection.d_min)

    def test_prefix_property_on_large_cloud(self):
        rng = np.random.default_rng(13)
        cloud = PointCloud(rng.uniform(0.0, 1.0, (500, 3)))
        rejection = rejection_sample(cloud, 0.1)
        combined = approx_ifp_with_rejection(cloud, 300, 0.1)
        n = min(300, rejection.indices.shape[0])
        assert combined.indices[:n].tolist() == rejection.indices[:n].tolist()
        assert combined.indices.shape[0] == 300
        assert len(set(combined.indices.tolist())) == 300

    def test_count_out_of_range(self):
        with pytest.raises(ValueError):
            approx_ifp_with_rejection(FIXTURE, 5, 1.0)


class TestDeterminism:
    def test_all_samplers_repeat_exactly(self):
        rng = np.random.default_rng(14)
        cloud = PointCloud(rng.uniform(0.0, 1.0, (80, 3)))
        nb = self_ball(cloud, 0.3)
        runs = []
        for _ in range(2):
            runs.append((
                ifp_sample(cloud, 20).indices,
                approx_ifp_no_rejection(cloud, 20, nb).indices,
                rejection_sample(cloud, 0.3).indices,
                approx_ifp_with_rejection(cloud, 40, 0.3).indices,
            ))
        for first, second in zip(*runs):
            np.testing.assert_array_equal(first, second)
