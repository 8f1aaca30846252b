import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowseg import GridShape, diffusion_step, disk, grid_adjacency, gt_displacement, square
from oracles import gt_displacement_naive, random_label_map


def _uniform_diffusivity(adj):
    counts = adj.valid.sum(axis=1, keepdims=True)
    return adj.valid / counts


class TestDiffusionStep:
    def test_uniform_features_are_fixed_point(self):
        adj = grid_adjacency(GridShape(4, 5), square(3))
        z = np.full((20, 3), 2.5)
        out = diffusion_step(z, _uniform_diffusivity(adj), 0.7, adj)
        np.testing.assert_allclose(out, z, atol=1e-12)

    def test_tau_zero_is_identity(self):
        adj = grid_adjacency(GridShape(3, 3), square(3))
        rng = np.random.default_rng(0)
        z = rng.normal(size=(9, 2))
        s = rng.uniform(0.0, 0.1, size=(9, adj.n_slots))
        np.testing.assert_array_equal(diffusion_step(z, s, 0.0, adj), z)

    def test_three_node_line(self):
        # 1x3 grid, uniform weights, tau=1: middle averages the ends, the
        # ends copy the middle
        shape = GridShape(1, 3)
        adj = grid_adjacency(shape, square(3))
        z = np.array([[0.0], [3.0], [0.0]])
        out = diffusion_step(z, _uniform_diffusivity(adj), 1.0, adj)
        np.testing.assert_allclose(out[:, 0], [3.0, 0.0, 3.0])

    def test_update_is_simultaneous(self):
        # an in-place raster sweep would give node 2 the new value of node 1
        shape = GridShape(1, 3)
        adj = grid_adjacency(shape, square(3))
        z = np.array([[6.0], [0.0], [0.0]])
        out = diffusion_step(z, _uniform_diffusivity(adj), 1.0, adj)
        np.testing.assert_allclose(out[:, 0], [0.0, 3.0, 0.0])

    def test_rejects_negative_diffusivity(self):
        adj = grid_adjacency(GridShape(2, 2), square(3))
        s = _uniform_diffusivity(adj)
        s[0, 4] = -s[0, 4]
        with pytest.raises(ValueError, match="non-negative"):
            diffusion_step(np.ones((4, 1)), s, 0.5, adj)

    def test_rejects_bad_weight_sums(self):
        adj = grid_adjacency(GridShape(2, 2), square(3))
        s = 3.0 * _uniform_diffusivity(adj)  # sums to 3
        with pytest.raises(ValueError, match="sums to"):
            diffusion_step(np.ones((4, 1)), s, 0.9, adj)
        # but acceptable when tau * sum <= 1
        out = diffusion_step(np.ones((4, 1)), s, 0.2, adj)
        assert np.all(np.isfinite(out))

    def test_rejects_tau_out_of_range(self):
        adj = grid_adjacency(GridShape(2, 2), square(3))
        s = _uniform_diffusivity(adj)
        for tau in (-0.1, 1.5):
            with pytest.raises(ValueError, match="tau"):
                diffusion_step(np.ones((4, 1)), s, tau, adj)

    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
    @settings(max_examples=30)
    def test_convex_combination_bounds(self, seed, tau):
        rng = np.random.default_rng(seed)
        adj = grid_adjacency(GridShape(3, 4), square(3))
        z = rng.normal(size=(12, 2))
        s = _uniform_diffusivity(adj)
        out = diffusion_step(z, s, tau, adj)
        assert out.min() >= z.min() - 1e-12
        assert out.max() <= z.max() + 1e-12


class TestGtDisplacement:
    def test_single_pixel_instance_stays(self):
        labels = np.zeros((7, 7), dtype=np.int64)
        labels[3, 3] = 1
        field = gt_displacement(labels, radius=2, iters=10)
        np.testing.assert_array_equal(field, np.zeros((7, 7, 2)))

    def test_centered_square_center_is_fixed(self):
        labels = np.zeros((9, 9), dtype=np.int64)
        labels[2:7, 2:7] = 1  # (2r+1)-square for r=2
        field = gt_displacement(labels, radius=2, iters=30)
        np.testing.assert_allclose(field[4, 4], [0.0, 0.0], atol=1e-12)

    def test_adherent_squares_point_toward_own_centroid(self):
        labels = np.zeros((9, 18), dtype=np.int64)
        labels[:, :9] = 1
        labels[:, 9:] = 2
        field = gt_displacement(labels)
        for k, centroid in [(1, (4.0, 4.0)), (2, (4.0, 13.0))]:
            mask = labels == k
            edge = np.zeros_like(mask)
            edge |= np.pad(~mask, 1)[:-2, 1:-1] & mask  # any 4-neighbor outside
            edge |= np.pad(~mask, 1)[2:, 1:-1] & mask
            edge |= np.pad(~mask, 1)[1:-1, :-2] & mask
            edge |= np.pad(~mask, 1)[1:-1, 2:] & mask
            rows, cols = np.nonzero(edge)
            for r, c in zip(rows, cols):
                to_center = np.array([centroid[0] - r, centroid[1] - c])
                assert field[r, c] @ to_center > 0

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(7)
        for radius, iters in [(2, 8), (5, 12)]:
            labels = random_label_map(rng, 14, 16)
            got = gt_displacement(labels, radius=radius, iters=iters)
            want = gt_displacement_naive(labels, radius, iters)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_label_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        labels = random_label_map(rng, 16, 16)
        relabeled = np.zeros_like(labels)
        for old, new in [(1, 9), (2, 4), (3, 1), (4, 70)]:
            relabeled[labels == old] = new
        f1 = gt_displacement(labels, radius=3, iters=16)
        f2 = gt_displacement(relabeled, radius=3, iters=16)
        np.testing.assert_array_equal(f1, f2)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(11)
        labels = random_label_map(rng, 12, 15)
        field = gt_displacement(labels, radius=3, iters=12)
        rot_field = gt_displacement(np.rot90(labels).copy(), radius=3, iters=12)
        h, w = labels.shape
        # np.rot90 sends (r, c) to (w-1-c, r); vectors (dr, dc) become (-dc, dr)
        for r in range(h):
            for c in range(w):
                np.testing.assert_allclose(
                    rot_field[w - 1 - c, r],
                    [-field[r, c, 1], field[r, c, 0]],
                    atol=1e-12,
                )

    def test_background_is_zero(self):
        rng = np.random.default_rng(5)
        labels = random_label_map(rng, 20, 20)
        field = gt_displacement(labels, radius=4, iters=24)
        np.testing.assert_array_equal(field[labels == 0], 0.0)

    def test_contraction_is_monotone(self):
        labels = np.zeros((16, 16), dtype=np.int64)
        labels[2:14, 2:8] = 1
        labels[2:14, 8:14] = 2
        h, w = labels.shape
        pos0 = np.stack(np.mgrid[0:h, 0:w], axis=-1).astype(float)
        prev = None
        for t in range(15):
            pos = pos0 + gt_displacement(labels, radius=3, iters=t)
            spreads = []
            for k in (1, 2):
                mask = labels == k
                centroid = pos0[mask].mean(axis=0)
                spreads.append(np.linalg.norm(pos[mask] - centroid, axis=1).mean())
            if prev is not None:
                assert all(s <= p + 1e-12 for s, p in zip(spreads, prev))
            prev = spreads

    def test_input_validation(self):
        with pytest.raises(ValueError):
            gt_displacement(np.zeros((4, 4)))  # float labels
        with pytest.raises(ValueError):
            gt_displacement(np.zeros((4, 4, 1), dtype=np.int64))
        with pytest.raises(ValueError):
            gt_displacement(-np.ones((4, 4), dtype=np.int64))
        with pytest.raises(ValueError):
            gt_displacement(np.ones((4, 4), dtype=np.int64), radius=0)
        with pytest.raises(ValueError):
            gt_displacement(np.ones((4, 4), dtype=np.int64), iters=-1)
