import numpy as np
import pytest

from flowseg import (
    GridShape,
    IsoParams,
    LayerParams,
    diffusivity,
    getblock_forward,
    getconv_forward,
    grid_adjacency,
    isotropic_attention_forward,
    load_layer_params,
    query_messages,
    random_iso_params,
    random_layer_params,
    save_layer_params,
    square,
)
from oracles import (
    oracle_diffusivity,
    oracle_getblock,
    oracle_getconv,
    oracle_isotropic,
    oracle_query_messages,
)


def zero_mlp_params(channels, n_slots, gamma=None, beta=None, dw=None, pw=None):
    return LayerParams(
        w1=np.zeros((channels, channels)),
        b1=np.zeros(channels),
        w2=np.zeros((channels, n_slots)),
        b2=np.zeros(n_slots),
        gamma=np.ones(channels) if gamma is None else gamma,
        beta=np.zeros(channels) if beta is None else beta,
        dw=dw,
        pw=pw,
    )


class TestQueryMessages:
    def test_zero_params_give_zero_queries(self):
        adj = grid_adjacency(GridShape(3, 3), square(3))
        z = np.random.default_rng(0).normal(size=(9, 4))
        np.testing.assert_array_equal(
            query_messages(z, zero_mlp_params(4, adj.n_slots)), 0.0
        )

    def test_identical_rows_map_identically(self):
        rng = np.random.default_rng(1)
        params = random_layer_params(rng, 4, 8)
        z = np.tile(rng.normal(size=(1, 4)), (6, 1))
        q = query_messages(z, params)
        np.testing.assert_array_equal(q, np.tile(q[:1], (6, 1)))

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(2)
        params = random_layer_params(rng, 5, 8)
        z = rng.normal(size=(12, 5))
        np.testing.assert_allclose(
            query_messages(z, params), oracle_query_messages(z, params), atol=1e-12
        )

    def test_rejects_bad_shapes(self):
        params = random_layer_params(np.random.default_rng(0), 4, 8)
        with pytest.raises(ValueError):
            query_messages(np.zeros((5, 3)), params)


class TestDiffusivity:
    def test_zero_queries_give_unit_edges(self):
        adj = grid_adjacency(GridShape(3, 4), square(3))
        s = diffusivity(np.zeros((12, 8)), adj)
        np.testing.assert_array_equal(s[adj.valid], 1.0)
        np.testing.assert_array_equal(s[~adj.valid], 0.0)

    def test_two_node_symmetry(self):
        adj = grid_adjacency(GridShape(1, 2), square(3))
        rng = np.random.default_rng(3)
        q = rng.normal(size=(2, 8))
        s = diffusivity(q, adj)
        # node 0's right slot is 4, node 1's left slot is 3
        assert s[0, 4] == pytest.approx(np.exp(q[0, 4] + q[1, 3]), abs=0)
        assert s[0, 4] == s[1, 3]

    def test_matches_brute_force_oracle_exactly(self):
        rng = np.random.default_rng(4)
        adj = grid_adjacency(GridShape(3, 3), square(3))
        q = rng.normal(size=(9, 8))
        np.testing.assert_array_equal(
            diffusivity(q, adj), oracle_diffusivity(q, 3, 3, square(3))
        )

    def test_symmetric_on_every_edge(self):
        rng = np.random.default_rng(5)
        adj = grid_adjacency(GridShape(4, 5), square(3))
        s = diffusivity(rng.normal(size=(20, 8)), adj)
        for i in range(20):
            for c in range(8):
                if adj.valid[i, c]:
                    assert s[i, c] == s[adj.nbr[i, c], adj.recip[c]]

    def test_unmasked_edges_are_positive(self):
        rng = np.random.default_rng(6)
        adj = grid_adjacency(GridShape(4, 4), square(3))
        s = diffusivity(rng.normal(scale=20.0, size=(16, 8)), adj)
        assert (s[adj.valid] > 0).all()

    def test_exponent_clamp(self):
        adj = grid_adjacency(GridShape(1, 2), square(3))
        s = diffusivity(np.full((2, 8), 100.0), adj)
        np.testing.assert_array_equal(s[adj.valid], np.exp(30.0))


class TestGetconvForward:
    def test_fully_masked_is_identity(self):
        adj = grid_adjacency(GridShape(3, 3), square(3))
        rng = np.random.default_rng(7)
        z = rng.normal(size=(9, 4))
        params = random_layer_params(rng, 4, adj.n_slots)
        params.gamma = np.ones(4)
        params.beta = np.zeros(4)
        out = getconv_forward(z, adj, params, cls_mask=np.arange(9))
        np.testing.assert_array_equal(out, z)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(8)
        adj = grid_adjacency(GridShape(4, 4), square(3))
        z = rng.normal(size=(16, 4))
        params = random_layer_params(rng, 4, adj.n_slots)
        np.testing.assert_allclose(
            getconv_forward(z, adj, params),
            oracle_getconv(z, 4, 4, square(3), params),
            atol=1e-10,
        )

    def test_masked_matches_dense_oracle(self):
        rng = np.random.default_rng(9)
        adj = grid_adjacency(GridShape(4, 4), square(3))
        z = rng.normal(size=(16, 3))
        params = random_layer_params(rng, 3, adj.n_slots)
        cls = rng.integers(0, 3, size=16)
        np.testing.assert_allclose(
            getconv_forward(z, adj, params, cls_mask=cls, norm_groups=cls),
            oracle_getconv(z, 4, 4, square(3), params, cls=cls, norm_groups=cls),
            atol=1e-10,
        )

    def test_masked_output_ignores_other_clusters(self):
        rng = np.random.default_rng(10)
        adj = grid_adjacency(GridShape(4, 4), square(3))
        z = rng.normal(size=(16, 4))
        params = random_layer_params(rng, 4, adj.n_slots)
        cls = np.repeat([1, 2], 8)
        base = getconv_forward(z, adj, params, cls_mask=cls, norm_groups=cls)
        bumped = z.copy()
        bumped[cls == 2] += rng.uniform(-1e3, 1e3, size=(8, 4))
        out = getconv_forward(bumped, adj, params, cls_mask=cls, norm_groups=cls)
        np.testing.assert_array_equal(out[cls == 1], base[cls == 1])

    def test_rejects_single_node_grid(self):
        adj = grid_adjacency(GridShape(1, 1), square(3))
        params = random_layer_params(np.random.default_rng(0), 2, adj.n_slots)
        with pytest.raises(ValueError, match="at least 2 nodes"):
            getconv_forward(np.zeros((1, 2)), adj, params)


class TestGetblockForward:
    def test_neutral_convs_reduce_to_getconv(self):
        rng = np.random.default_rng(11)
        h, w, cdim = 5, 6, 3
        adj = grid_adjacency(GridShape(h, w), square(3))
        dw = np.zeros((cdim, 3, 3))
        dw[:, 1, 1] = 1.0  # identity depthwise
        params = zero_mlp_params(cdim, adj.n_slots, dw=dw, pw=np.eye(cdim))
        z = rng.normal(size=(h, w, cdim))
        out = getblock_forward(z, square(3), params)
        ref = getconv_forward(z.reshape(-1, cdim), adj, params)
        np.testing.assert_allclose(out.reshape(-1, cdim), ref, atol=1e-12)

    def test_zero_kernels_give_identity(self):
        rng = np.random.default_rng(12)
        cdim = 4
        params = random_layer_params(rng, cdim, 8, kernel=3)
        params.dw = np.zeros_like(params.dw)
        params.pw = np.zeros_like(params.pw)
        params.beta = np.zeros(cdim)
        z = rng.normal(size=(6, 6, cdim))
        np.testing.assert_array_equal(getblock_forward(z, square(3), params), z)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(13)
        params = random_layer_params(rng, 3, 8, kernel=3)
        z = rng.normal(size=(8, 8, 3))
        np.testing.assert_allclose(
            getblock_forward(z, square(3), params),
            oracle_getblock(z, square(3), params),
            atol=1e-10,
        )

    def test_requires_kernels(self):
        params = random_layer_params(np.random.default_rng(0), 3, 8)
        with pytest.raises(ValueError, match="dw and pw"):
            getblock_forward(np.zeros((4, 4, 3)), square(3), params)


class TestIsotropicForward:
    def test_uniform_features_give_uniform_interior(self):
        # corner/edge nodes aggregate fewer neighbors, so compare interior rows
        adj = grid_adjacency(GridShape(5, 5), square(3))
        params = random_iso_params(np.random.default_rng(14), 3)
        z = np.tile([[1.0, -2.0, 0.5]], (25, 1))
        out = np.asarray(isotropic_attention_forward(z, adj, params))
        interior = [r * 5 + c for r in range(1, 4) for c in range(1, 4)]
        sub = out[interior]
        np.testing.assert_allclose(sub, np.broadcast_to(sub[0], sub.shape), atol=1e-12)

    def test_zero_maps_reduce_to_plain_sum(self):
        rng = np.random.default_rng(15)
        adj = grid_adjacency(GridShape(3, 4), square(3))
        params = IsoParams(
            wq=np.zeros(3), bq=0.0, wk=np.zeros(3), bk=0.0,
            gamma=np.ones(3), beta=np.zeros(3),
        )
        z = rng.normal(size=(12, 3))
        zero_q = zero_mlp_params(3, adj.n_slots)
        np.testing.assert_allclose(
            isotropic_attention_forward(z, adj, params),
            getconv_forward(z, adj, zero_q),  # both have s = 1 on every edge
            atol=1e-12,
        )

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(16)
        adj = grid_adjacency(GridShape(4, 4), square(3))
        params = random_iso_params(rng, 4)
        z = rng.normal(size=(16, 4))
        np.testing.assert_allclose(
            isotropic_attention_forward(z, adj, params),
            oracle_isotropic(z, 4, 4, square(3), params),
            atol=1e-10,
        )


class TestParamFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        params = random_layer_params(rng, 4, 8, kernel=3)
        path = tmp_path / "layer.bin"
        save_layer_params(path, params)
        loaded = load_layer_params(path)
        for name in ("w1", "b1", "w2", "b2", "gamma", "beta", "dw", "pw"):
            want = np.asarray(getattr(params, name), dtype=np.float32).astype(np.float64)
            np.testing.assert_array_equal(getattr(loaded, name), want)

    def test_round_trip_without_kernels(self, tmp_path):
        params = random_layer_params(np.random.default_rng(18), 3, 8)
        path = tmp_path / "layer.bin"
        save_layer_params(path, params)
        loaded = load_layer_params(path)
        assert loaded.dw is None and loaded.pw is None

    def test_missing_tensor_rejected(self, tmp_path):
        from flowseg import write_tensors

        path = tmp_path / "bad.bin"
        write_tensors(path, {"w1": np.zeros((2, 2))})
        with pytest.raises(ValueError, match="lacks tensors"):
            load_layer_params(path)
