"""Dual-attention routing policy.

Encoder: a GAT branch over the time-window adjacency feeds an edge-enhanced
self-attention stack whose scores see travel-time/energy edge features.
Decoder: a vehicle-selection head (cross-attention over vehicle embeddings)
followed by a node-selection head (glimpse + tanh-clipped compatibilities,
masked by the environment). Three ablation switches remove the edge features,
the time-window branch, or the vehicle head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .env import EnvConfig, Rollout, Solution, UnservedError
from .instance import Instance
from .layers import (BatchNorm, EdgeAttnLayer, FF2, GatLayer, Linear,
                     MhaGlimpse, Module, ShaCompat)


@dataclass
class PolicyConfig:
    d_h: int = 64
    d_e: int = 16
    n_heads: int = 4
    n_gat_layers: int = 2
    n_edge_layers: int = 2
    d_ff: int = 128
    clip: float = 10.0
    use_ee: bool = True    # edge features in attention scores
    use_twe: bool = True   # time-window GAT branch
    use_hd: bool = True    # learned vehicle-selection head
    ee_sparse: bool = False  # restrict edge attention to the TW adjacency
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyConfig":
        return cls(**doc)


@dataclass
class Encoding:
    node_emb: Tensor          # (n, d_h)
    graph_emb: Tensor         # (d_h,)
    vehicle_static: Tensor | None  # (nu, d_h) cached per episode


class Policy(Module):
    def __init__(self, config: PolicyConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        d_h, d_e = config.d_h, config.d_e
        if config.use_twe:
            self.gat_in = Linear(rng, 4, d_h)
            self.gat_layers = [GatLayer(rng, d_h, d_h)
                               for _ in range(config.n_gat_layers)]
            self.node_proj = Linear(rng, d_h + 1, d_h)
        else:
            self.node_proj = Linear(rng, 5, d_h)
        self.node_bn = BatchNorm(d_h)
        if config.use_ee:
            self.edge_proj = Linear(rng, 2, d_e)
            self.edge_bn = BatchNorm(d_e)
        self.edge_layers = [
            EdgeAttnLayer(rng, d_h, d_e, config.n_heads, config.d_ff,
                          use_edges=config.use_ee)
            for _ in range(config.n_edge_layers)
        ]
        if config.use_hd:
            self.veh_static_ff = FF2(rng, 2, d_h, d_h)
            self.veh_dynamic_ff = FF2(rng, 3 + d_h, d_h, d_h)
            self.veh_join_ff = FF2(rng, 2 * d_h, d_h, d_h)
            self.veh_glimpse = MhaGlimpse(rng, 3 * d_h, d_h, config.n_heads)
            self.veh_compat = ShaCompat(rng, d_h)
        self.node_glimpse = MhaGlimpse(rng, 3 + 2 * d_h, d_h, config.n_heads)
        self.node_compat = ShaCompat(rng, d_h, clip=config.clip)

    def n_params(self) -> int:
        return sum(p.data.size for p in self.named_params().values())

    # -- feature normalization ----------------------------------------

    @staticmethod
    def _norms(instance: Instance) -> dict:
        return {
            "coord": max(float(np.abs(instance.xy).max()), 1.0),
            "time": instance.t_max,
            "demand": max(v.cargo_capacity for v in instance.fleet),
            "energy": max(v.battery_capacity for v in instance.fleet),
            "cargo": max(v.cargo_capacity for v in instance.fleet),
        }

    # -- encoder -------------------------------------------------------

    def encode(self, instance: Instance, training: bool = False) -> Encoding:
        cfg = self.config
        n = instance.n_nodes
        norms = self._norms(instance)
        base = np.column_stack([instance.xy / norms["coord"],
                                instance.tw_open[:, None] / norms["time"],
                                instance.tw_close[:, None] / norms["time"]])
        d_col = (instance.demands / norms["demand"])[:, None]
        if cfg.use_twe:
            H = self.gat_in(Tensor(base))
            for layer in self.gat_layers:
                H = layer(H, instance.adjacency)
            raw = ad.concat([H, Tensor(d_col)], axis=1)
        else:
            raw = Tensor(np.column_stack([base, d_col]))
        H = self.node_bn(self.node_proj(raw), training)

        E = None
        if cfg.use_ee:
            pairs = np.stack([instance.ec / norms["energy"],
                              instance.tt / norms["time"]], axis=-1)
            flat = self.edge_bn(self.edge_proj(Tensor(pairs.reshape(n * n, 2))),
                                training)
            E = flat.reshape(n, n, cfg.d_e)

        neighbors = instance.adjacency if cfg.ee_sparse else np.ones((n, n), dtype=np.uint8)
        for layer in self.edge_layers:
            H = layer(H, E, neighbors, training)

        static = None
        if cfg.use_hd:
            feats = np.array([[v.battery_capacity / norms["energy"],
                               v.cargo_capacity / norms["cargo"]]
                              for v in instance.fleet])
            static = self.veh_static_ff(Tensor(feats))
        return Encoding(node_emb=H, graph_emb=H.mean(axis=0), vehicle_static=static)

    # -- decoder heads -------------------------------------------------

    def vehicle_probs(self, enc: Encoding, rollout: Rollout,
                      feasible: list[int]) -> Tensor:
        """Distribution over vehicles; infeasible vehicles get exactly 0."""
        inst = rollout.instance
        scal = np.array([[v.remaining_cargo / inst.fleet[j].cargo_capacity,
                          v.remaining_energy / inst.fleet[j].battery_capacity,
                          v.clock / inst.t_max]
                         for j, v in enumerate(rollout.vehicles)])
        locs = np.array([v.location for v in rollout.vehicles])
        dyn = self.veh_dynamic_ff(ad.concat([Tensor(scal), enc.node_emb[locs]], axis=1))
        emb = self.veh_join_ff(ad.concat([enc.vehicle_static, dyn], axis=1))

        visited = np.flatnonzero(rollout.visited)
        to_visit = np.array([c for c in inst.customers if not rollout.visited[c]])
        d_h = self.config.d_h
        parts = [emb.mean(axis=0)]
        for idx in (visited, to_visit):
            parts.append(enc.node_emb[idx].mean(axis=0) if len(idx)
                         else Tensor(np.zeros(d_h)))
        context = ad.concat(parts)
        glimpse = self.veh_glimpse(context, emb)
        logits = self.veh_compat(glimpse, emb)
        keep = np.zeros(len(rollout.vehicles), dtype=np.uint8)
        keep[feasible] = 1
        return ad.softmax_masked(logits, keep, axis=0)

    def node_probs(self, enc: Encoding, rollout: Rollout, j: int,
                   keep: np.ndarray) -> Tensor:
        inst = rollout.instance
        v = rollout.vehicles[j]
        scal = Tensor(np.array([v.remaining_energy / inst.fleet[j].battery_capacity,
                                v.remaining_cargo / inst.fleet[j].cargo_capacity,
                                v.clock / inst.t_max]))
        context = ad.concat([scal, enc.node_emb[v.location], enc.graph_emb])
        glimpse = self.node_glimpse(context, enc.node_emb)
        logits = self.node_compat(glimpse, enc.node_emb)
        return ad.softmax_masked(logits, keep, axis=0)


# -- decode loops ------------------------------------------------------


@dataclass
class DecodeResult:
    solution: Solution | None
    cost: float
    deadlock: bool = False
    reason: str = ""
    unserved: int = 0
    actions: list = field(default_factory=list)
    step_log_probs: list = field(default_factory=list)
    log_prob: Tensor | None = None

    @property
    def feasible(self) -> bool:
        return self.solution is not None


def _rollout_once(policy: Policy, instance: Instance, enc: Encoding,
                  env_config: EnvConfig, rng: np.random.Generator | None,
                  record: bool) -> DecodeResult:
    """One full construction; `rng is None` means greedy argmax."""
    cfg = policy.config
    rollout = Rollout(instance, env_config)
    actions: list[tuple[int, int]] = []
    step_lps: list[float] = []
    terms: list[Tensor] = []
    rr_pointer = 0

    def dead(reason: str) -> DecodeResult:
        # partial log-prob kept so deadlocked training rollouts still carry gradient
        return DecodeResult(None, float("inf"), deadlock=True, reason=reason,
                            unserved=rollout.remaining, actions=actions,
                            step_log_probs=step_lps, log_prob=_sum_terms(terms))

    while not rollout.complete:
        if rollout.step_count >= rollout.max_steps:
            return dead("step limit exceeded")
        masks = [rollout.build_mask(j) for j in range(len(rollout.vehicles))]
        feasible = [j for j, m in enumerate(masks) if not m.all()]
        if not feasible:
            return dead("no vehicle has a feasible move")
        lp_step_terms = []
        if cfg.use_hd and len(feasible) > 1:
            pf = policy.vehicle_probs(enc, rollout, feasible)
            if rng is None:
                j = int(np.argmax(pf.data))
            else:
                p = pf.data / pf.data.sum()
                j = int(rng.choice(len(p), p=p))
            lp_step_terms.append(pf[j])
        elif cfg.use_hd:
            # forced choice: the distribution is degenerate (p = 1, zero grad)
            j = feasible[0]
        else:
            # deterministic cyclic choice over vehicles with feasible moves
            while rr_pointer % len(rollout.vehicles) not in feasible:
                rr_pointer += 1
            j = rr_pointer % len(rollout.vehicles)
            rr_pointer += 1
        keep = 1 - masks[j]
        pn = policy.node_probs(enc, rollout, j, keep)
        if rng is None:
            i = int(np.argmax(pn.data))
        else:
            p = pn.data / pn.data.sum()
            i = int(rng.choice(len(p), p=p))
        lp_step_terms.append(pn[i])
        lp = float(sum(np.log(t.data) for t in lp_step_terms))
        if record:
            for t in lp_step_terms:
                terms.append(ad.log(t))
        actions.append((j, i))
        step_lps.append(lp)
        rollout.step(j, i)
    try:
        solution = rollout.finalize()
    except UnservedError as exc:
        return dead(str(exc))
    return DecodeResult(solution=solution, cost=solution.total_cost,
                        actions=actions, step_log_probs=step_lps,
                        log_prob=_sum_terms(terms))


def _sum_terms(terms: list[Tensor]) -> Tensor | None:
    if not terms:
        return None
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def decode(policy: Policy, instance: Instance, mode: str = "greedy",
           n_samples: int = 1, seed: int = 0,
           env_config: EnvConfig = EnvConfig(),
           record_log_prob: bool = False) -> DecodeResult:
    """Greedy argmax construction, or best-of-n sampled construction.

    Sampling returns the cheapest feasible rollout; when every rollout
    deadlocks the result reports the deadlock instead of a solution.
    """
    if mode not in ("greedy", "sampling"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if mode == "sampling" and n_samples < 1:
        raise ValueError("sampling needs n_samples >= 1")
    if record_log_prob:
        enc = policy.encode(instance, training=True)
        if mode == "greedy":
            return _rollout_once(policy, instance, enc, env_config, None, True)
        rng = np.random.default_rng(seed)
        best = None
        for _ in range(n_samples):
            res = _rollout_once(policy, instance, enc, env_config, rng, True)
            if best is None or res.cost < best.cost:
                best = res
        return best
    with ad.no_grad():
        enc = policy.encode(instance, training=True)
        if mode == "greedy":
            return _rollout_once(policy, instance, enc, env_config, None, False)
        best = None
        seeds = np.random.SeedSequence(seed).spawn(n_samples)
        for s in seeds:
            res = _rollout_once(policy, instance, enc, env_config,
                                np.random.default_rng(s), False)
            if best is None or res.cost < best.cost:
                best = res
        return best
