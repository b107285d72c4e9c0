"""Structural properties of the attention layers: coefficient normalization,
permutation equivariance, logit clipping, and parameter bookkeeping."""

import numpy as np
import pytest

from evroute.autodiff import Tensor
from evroute.layers import (BatchNorm, EdgeAttnLayer, FF2, GatLayer, Linear,
                            MhaGlimpse, Module, ShaCompat)

RNG = np.random.default_rng(3)


def rand_adj(n, rng):
    adj = (rng.uniform(size=(n, n)) > 0.4).astype(np.uint8)
    np.fill_diagonal(adj, 1)
    return adj


class TestGatLayer:
    def test_coefficients_rows_sum_to_one(self):
        n, d = 7, 8
        layer = GatLayer(np.random.default_rng(0), d, d)
        H = Tensor(RNG.normal(size=(n, d)))
        adj = rand_adj(n, RNG)
        alpha = layer.coefficients(H, adj).data
        np.testing.assert_allclose(alpha.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(alpha[adj == 0] == 0.0)

    def test_permutation_equivariance(self):
        n, d = 6, 8
        layer = GatLayer(np.random.default_rng(1), d, d)
        H = RNG.normal(size=(n, d))
        adj = rand_adj(n, RNG)
        perm = np.random.default_rng(2).permutation(n)
        out = layer(Tensor(H), adj).data
        out_p = layer(Tensor(H[perm]), adj[np.ix_(perm, perm)]).data
        np.testing.assert_allclose(out_p, out[perm], atol=1e-12)


class TestEdgeAttnLayer:
    def _layer(self, use_edges=True, d=8, d_e=4, heads=2):
        return EdgeAttnLayer(np.random.default_rng(0), d, d_e, heads, 16,
                             use_edges=use_edges)

    def test_coefficients_normalized_per_target_and_head(self):
        n, d, d_e = 5, 8, 4
        layer = self._layer()
        H = Tensor(RNG.normal(size=(n, d)))
        E = Tensor(RNG.normal(size=(n, n, d_e)))
        adj = rand_adj(n, RNG)
        alpha = layer.coefficients(H, E, adj).data
        np.testing.assert_allclose(alpha.sum(axis=1), 1.0, atol=1e-12)

    def test_permutation_equivariance(self):
        n, d, d_e = 6, 8, 4
        layer = self._layer()
        H = RNG.normal(size=(n, d))
        E = RNG.normal(size=(n, n, d_e))
        adj = rand_adj(n, RNG)
        perm = np.random.default_rng(5).permutation(n)
        out = layer(Tensor(H), Tensor(E), adj, training=True).data
        out_p = layer(Tensor(H[perm]), Tensor(E[np.ix_(perm, perm)]),
                      adj[np.ix_(perm, perm)], training=True).data
        np.testing.assert_allclose(out_p, out[perm], atol=1e-12)

    def test_edge_features_change_output(self):
        n, d, d_e = 5, 8, 4
        layer = self._layer(use_edges=True)
        H = Tensor(RNG.normal(size=(n, d)))
        adj = np.ones((n, n), dtype=np.uint8)
        e1 = Tensor(RNG.normal(size=(n, n, d_e)))
        e2 = Tensor(RNG.normal(size=(n, n, d_e)))
        o1 = layer(H, e1, adj, training=True).data
        o2 = layer(H, e2, adj, training=True).data
        assert not np.allclose(o1, o2)

    def test_no_edges_variant_ignores_edge_input(self):
        layer = self._layer(use_edges=False)
        assert not hasattr(layer, "Wse")
        n, d = 5, 8
        H = Tensor(RNG.normal(size=(n, d)))
        adj = np.ones((n, n), dtype=np.uint8)
        out = layer(H, None, adj, training=True)
        assert out.shape == (n, d)

    def test_head_mismatch_raises(self):
        with pytest.raises(ValueError):
            EdgeAttnLayer(np.random.default_rng(0), 9, 4, 2, 16)


class TestDecoderBlocks:
    def test_glimpse_mask_excludes_nodes(self):
        d = 8
        g = MhaGlimpse(np.random.default_rng(0), d, d, 2)
        ctx = Tensor(RNG.normal(size=d))
        H = RNG.normal(size=(5, d))
        keep = np.array([1, 1, 0, 1, 1], dtype=np.uint8)
        out1 = g(ctx, Tensor(H), keep).data
        H2 = H.copy()
        H2[2] += 100.0  # only the masked node changes
        out2 = g(ctx, Tensor(H2), keep).data
        np.testing.assert_allclose(out1, out2, atol=1e-12)

    def test_compat_clip_bound(self):
        d = 8
        c = ShaCompat(np.random.default_rng(0), d, clip=10.0)
        q = Tensor(RNG.normal(size=d) * 50)
        H = Tensor(RNG.normal(size=(6, d)) * 50)
        u = c(q, H).data
        assert np.all(np.abs(u) <= 10.0)

    def test_compat_unclipped(self):
        d = 8
        c = ShaCompat(np.random.default_rng(0), d, clip=None)
        q = Tensor(RNG.normal(size=d) * 50)
        H = Tensor(RNG.normal(size=(6, d)) * 50)
        assert np.any(np.abs(c(q, H).data) > 10.0)


class TestModuleBookkeeping:
    def test_named_params_walks_nesting(self):
        class Net(Module):
            def __init__(self):
                rng = np.random.default_rng(0)
                self.lin = Linear(rng, 3, 4)
                self.stack = [FF2(rng, 4, 8, 4), FF2(rng, 4, 8, 4)]
                self.bn = BatchNorm(4)

        net = Net()
        names = set(net.named_params())
        assert "lin.W" in names and "stack.1.l2.b" in names
        assert "bn.gamma" in names
        buffers = net.buffers()
        assert "bn.running_mean" in buffers

    def test_param_grads_flow(self):
        lin = Linear(np.random.default_rng(0), 3, 2)
        out = lin(Tensor(RNG.normal(size=(4, 3)))).sum()
        out.backward()
        assert lin.W.grad is not None and np.any(lin.W.grad != 0)
