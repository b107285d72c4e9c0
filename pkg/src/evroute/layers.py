"""Neural building blocks: linear/FF stacks, batch norm, the neighbour-
restricted graph-attention layer, edge-enhanced multi-head attention, and
the MHA glimpse / single-head compatibility pair used by the decoders.

Layers are plain objects holding Tensors; forward passes are pure functions
of (inputs, params), so parameter sets can be shared read-only across
parallel rollouts.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def _init(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    scale = 1.0 / np.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


class Module:
    """Minimal parameter container; children found by attribute walk."""

    def named_params(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, val in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[key] = val
            elif isinstance(val, Module):
                out.update(val.named_params(f"{key}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_params(f"{key}.{i}."))
        return out

    def buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, val in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(val, np.ndarray):
                out[key] = val
            elif isinstance(val, Module):
                out.update(val.buffers(f"{key}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.buffers(f"{key}.{i}."))
        return out


class Linear(Module):
    def __init__(self, rng, d_in: int, d_out: int):
        self.W = _init(rng, (d_in, d_out), d_in)
        self.b = _init(rng, (d_out,), d_in)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.W + self.b


class FF2(Module):
    """Two-layer fully connected block with ReLU activations."""

    def __init__(self, rng, d_in: int, d_hidden: int, d_out: int):
        self.l1 = Linear(rng, d_in, d_hidden)
        self.l2 = Linear(rng, d_hidden, d_out)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.relu(self.l2(ad.relu(self.l1(x))))


class BatchNorm(Module):
    def __init__(self, d: int, momentum: float = 0.1):
        self.gamma = Tensor(np.ones(d), requires_grad=True)
        self.beta = Tensor(np.zeros(d), requires_grad=True)
        self.running_mean = np.zeros(d)
        self.running_var = np.ones(d)
        self.momentum = momentum

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return ad.batch_norm(x, self.gamma, self.beta, self.running_mean,
                             self.running_var, training=training,
                             momentum=self.momentum)


class GatLayer(Module):
    """Attention over time-window neighbours: score relu(a1.Wh_i + a2.Wh_j),
    softmax restricted to {j : adj_ij = 1}, update relu(sum alpha Wh)."""

    def __init__(self, rng, d_in: int, d_out: int):
        self.W = _init(rng, (d_in, d_out), d_in)
        self.a1 = _init(rng, (d_out,), d_out)
        self.a2 = _init(rng, (d_out,), d_out)

    def coefficients(self, H: Tensor, adj: np.ndarray) -> Tensor:
        n = H.shape[0]
        Wh = H @ self.W
        s = (Wh @ self.a1).reshape(n, 1) + (Wh @ self.a2).reshape(1, n)
        return ad.softmax_masked(ad.relu(s), adj, axis=1)

    def __call__(self, H: Tensor, adj: np.ndarray) -> Tensor:
        alpha = self.coefficients(H, adj)
        return ad.relu(alpha @ (H @ self.W))


class EdgeAttnLayer(Module):
    """Multi-head attention whose per-pair score is a learned vector over
    [h_i || h_j || e_ij], followed by skip + BN and an FF sublayer with
    skip + BN. `use_edges=False` drops the e_ij term (ablation)."""

    def __init__(self, rng, d_h: int, d_e: int, n_heads: int, d_ff: int,
                 use_edges: bool = True):
        if d_h % n_heads:
            raise ValueError("hidden dim must divide evenly across heads")
        self.n_heads = n_heads
        self.use_edges = use_edges
        self.Ws1 = _init(rng, (d_h, n_heads), d_h)
        self.Ws2 = _init(rng, (d_h, n_heads), d_h)
        if use_edges:
            self.Wse = _init(rng, (d_e, n_heads), d_e)
        self.Wv = _init(rng, (d_h, d_h), d_h)
        self.bn1 = BatchNorm(d_h)
        self.ff1 = Linear(rng, d_h, d_ff)
        self.ff2 = Linear(rng, d_ff, d_h)
        self.bn2 = BatchNorm(d_h)

    def coefficients(self, H: Tensor, E: Tensor | None, neighbors: np.ndarray) -> Tensor:
        n = H.shape[0]
        k = self.n_heads
        s = (H @ self.Ws1).reshape(n, 1, k) + (H @ self.Ws2).reshape(1, n, k)
        if self.use_edges:
            d_e = E.shape[-1]
            s = s + (E.reshape(n * n, d_e) @ self.Wse).reshape(n, n, k)
        # softmax over the source axis j, per target node i and head
        return ad.softmax_masked(ad.relu(s), neighbors[:, :, None], axis=1)

    def __call__(self, H: Tensor, E: Tensor | None, neighbors: np.ndarray,
                 training: bool) -> Tensor:
        n = H.shape[0]
        k = self.n_heads
        dk = H.shape[1] // k
        alpha = self.coefficients(H, E, neighbors)          # (n, n, k)
        V = (H @ self.Wv).reshape(n, k, dk).transpose(1, 0, 2)   # (k, n, dk)
        msg = alpha.transpose(2, 0, 1) @ V                  # (k, n, dk)
        msg = msg.transpose(1, 0, 2).reshape(n, k * dk)
        h = self.bn1(H + ad.relu(msg), training)
        return self.bn2(h + ad.relu(self.ff2(ad.relu(self.ff1(h)))), training)


class MhaGlimpse(Module):
    """Multi-head attention of one context query over a set of embeddings."""

    def __init__(self, rng, d_query: int, d_h: int, n_heads: int):
        if d_h % n_heads:
            raise ValueError("hidden dim must divide evenly across heads")
        self.n_heads = n_heads
        self.Wq = _init(rng, (d_query, d_h), d_query)
        self.Wk = _init(rng, (d_h, d_h), d_h)
        self.Wv = _init(rng, (d_h, d_h), d_h)
        self.Wo = _init(rng, (d_h, d_h), d_h)

    def __call__(self, context: Tensor, H: Tensor, keep=None) -> Tensor:
        n, d_h = H.shape
        k = self.n_heads
        dk = d_h // k
        q = (context @ self.Wq).reshape(k, 1, dk)
        K = (H @ self.Wk).reshape(n, k, dk).transpose(1, 2, 0)    # (k, dk, n)
        V = (H @ self.Wv).reshape(n, k, dk).transpose(1, 0, 2)    # (k, n, dk)
        scores = (q @ K) * (1.0 / np.sqrt(dk))                    # (k, 1, n)
        if keep is None:
            keep = np.ones(n, dtype=np.uint8)
        attn = ad.softmax_masked(scores, np.asarray(keep)[None, None, :], axis=2)
        out = (attn @ V).reshape(d_h)
        return out @ self.Wo


class ShaCompat(Module):
    """Single-head compatibility logits; optional tanh clipping to [-C, C]."""

    def __init__(self, rng, d_h: int, clip: float | None = None):
        self.Wq = _init(rng, (d_h, d_h), d_h)
        self.Wk = _init(rng, (d_h, d_h), d_h)
        self.clip = clip

    def __call__(self, query: Tensor, H: Tensor) -> Tensor:
        q = query @ self.Wq
        K = H @ self.Wk
        u = (K @ q) * (1.0 / np.sqrt(H.shape[1]))
        if self.clip is not None:
            u = self.clip * ad.tanh(u)
        return u
