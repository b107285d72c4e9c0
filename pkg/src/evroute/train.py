"""REINFORCE with a greedy roll-out baseline.

Each update: sample one rollout per fresh instance from the current policy,
decode the same instances greedily with a frozen baseline copy, and ascend
the advantage-weighted log-probability. The baseline is replaced by the
current policy when it is significantly better on a held-out set (one-sided
paired t-test).
"""

from __future__ import annotations

import copy
import csv
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy import stats

from . import autodiff as ad
from .env import EnvConfig
from .instance import generate_instance
from .optim import AdamState, adam_step, zero_grads
from .policy import Policy, decode


@dataclass
class TrainConfig:
    instance_size: int | tuple[int, int] = 10   # fixed size, or inclusive range
    n_stations: int | None = None
    batch_size: int = 64
    n_instances: int = 20_000
    instances_per_epoch: int = 1_280
    lr: float = 1e-3
    lr_decay: float = 1.0        # multiplicative, applied after each epoch
    baseline_sig: float = 0.05
    eval_instances: int = 256
    seed: int = 0
    checkpoint_every: int = 0    # epochs; 0 disables
    self_critical: bool = False  # baseline = greedy rollout of current policy
    n_rollouts: int = 1          # >1: shared mean-cost baseline per instance
    log_name: str = "training_log.csv"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochStats:
    epoch: int
    mean_cost: float
    baseline_cost: float
    grad_norm: float
    infeasible_rate: float
    baseline_updated: bool
    seconds: float


def deadlock_penalty(instance, unserved: int | None = None) -> float:
    """Cost of an aborted episode: twice the fleet horizon, graded by how
    many customers were left unserved so failed rollouts still rank against
    each other and carry gradient."""
    base = 2.0 * instance.n_vehicles * instance.t_max
    if unserved is None:
        unserved = instance.n_customers
    return base * (1.0 + unserved / instance.n_customers)


def _gen(size, n_stations, seed):
    seed = int(seed)
    if not isinstance(size, int):
        lo, hi = size
        size = lo + seed % (hi - lo + 1)
    return generate_instance(size, seed, n_stations=n_stations)


def _greedy_cost(policy: Policy, instance, env_config: EnvConfig) -> float:
    res = decode(policy, instance, mode="greedy", env_config=env_config)
    return res.cost if res.feasible else deadlock_penalty(instance, res.unserved)


def evaluate_greedy(policy: Policy, instances, env_config: EnvConfig) -> np.ndarray:
    return np.array([_greedy_cost(policy, inst, env_config) for inst in instances])


def maybe_update_baseline(policy: Policy, baseline: Policy, eval_instances,
                          baseline_costs: np.ndarray, sig: float,
                          env_config: EnvConfig):
    """Replace the baseline when the current policy's greedy decode beats it
    on the eval set with one-sided paired significance below `sig`.

    Returns (baseline, baseline_costs, updated).
    """
    cur = evaluate_greedy(policy, eval_instances, env_config)
    diff = cur - baseline_costs
    if diff.mean() >= 0:
        return baseline, baseline_costs, False
    if np.allclose(diff, 0.0):
        return baseline, baseline_costs, False
    pvalue = stats.ttest_rel(cur, baseline_costs, alternative="less").pvalue
    if pvalue < sig:
        return copy.deepcopy(policy), cur, True
    return baseline, baseline_costs, False


def train(policy: Policy, config: TrainConfig,
          env_config: EnvConfig = EnvConfig(),
          out_dir: str | None = None,
          progress=None) -> list[EpochStats]:
    """Run the full REINFORCE schedule; returns per-epoch statistics.

    `out_dir`, when given, receives the per-epoch CSV log and periodic
    checkpoints. Same seed and config give an identical parameter trajectory.
    """
    from .checkpoint import save_policy  # local import, avoids cycle

    rng = np.random.default_rng(config.seed)
    baseline = copy.deepcopy(policy)
    eval_set = [_gen(config.instance_size, config.n_stations, s)
                for s in rng.integers(0, 2**31, size=config.eval_instances)]
    baseline_costs = evaluate_greedy(baseline, eval_set, env_config)

    opt = AdamState(lr=config.lr)
    n_epochs = max(1, config.n_instances // config.instances_per_epoch)
    batches_per_epoch = max(1, config.instances_per_epoch // config.batch_size)
    params = policy.named_params()
    stats_rows: list[EpochStats] = []

    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    for epoch in range(n_epochs):
        t0 = time.perf_counter()
        epoch_costs: list[float] = []
        epoch_base: list[float] = []
        infeasible = 0
        grad_norm = 0.0
        for _ in range(batches_per_epoch):
            instances = [_gen(config.instance_size, config.n_stations, s)
                         for s in rng.integers(0, 2**31, size=config.batch_size)]
            terms = []
            for inst in instances:
                if config.n_rollouts > 1:
                    rollouts = []
                    for _ in range(config.n_rollouts):
                        sample_seed = int(rng.integers(0, 2**31))
                        res = decode(policy, inst, mode="sampling",
                                     n_samples=1, seed=sample_seed,
                                     env_config=env_config,
                                     record_log_prob=True)
                        cost = res.cost if res.feasible \
                            else deadlock_penalty(inst, res.unserved)
                        if not res.feasible:
                            infeasible += 1
                        rollouts.append((cost, res.log_prob))
                    bcost = float(np.mean([c for c, _ in rollouts]))
                    epoch_costs.append(min(c for c, _ in rollouts))
                    epoch_base.append(bcost)
                    scale = 1.0 / config.n_rollouts
                    for cost, lp in rollouts:
                        if lp is not None:
                            terms.append(((cost - bcost) * scale) * lp)
                    continue
                sample_seed = int(rng.integers(0, 2**31))
                res = decode(policy, inst, mode="sampling", n_samples=1,
                             seed=sample_seed, env_config=env_config,
                             record_log_prob=True)
                cost = res.cost if res.feasible else deadlock_penalty(inst, res.unserved)
                if not res.feasible:
                    infeasible += 1
                with ad.no_grad():
                    bcost = _greedy_cost(
                        policy if config.self_critical else baseline,
                        inst, env_config)
                epoch_costs.append(cost)
                epoch_base.append(bcost)
                if res.log_prob is not None:
                    terms.append((cost - bcost) * res.log_prob)
            if not terms:
                continue
            loss = terms[0]
            for t in terms[1:]:
                loss = loss + t
            loss = loss * (1.0 / config.batch_size)
            if not np.isfinite(loss.data):
                zero_grads(params)
                continue
            loss.backward()
            grad_norm = float(np.sqrt(sum(
                float((p.grad ** 2).sum()) for p in params.values()
                if p.grad is not None)))
            adam_step(params, opt)
            zero_grads(params)

        if config.self_critical or config.n_rollouts > 1:
            updated = False
        else:
            baseline, baseline_costs, updated = maybe_update_baseline(
                policy, baseline, eval_set, baseline_costs,
                config.baseline_sig, env_config)
        row = EpochStats(epoch=epoch,
                         mean_cost=float(np.mean(epoch_costs)) if epoch_costs else float("nan"),
                         baseline_cost=float(np.mean(epoch_base)) if epoch_base else float("nan"),
                         grad_norm=grad_norm,
                         infeasible_rate=infeasible / max(
                             1, len(epoch_costs) * max(1, config.n_rollouts)),
                         baseline_updated=updated,
                         seconds=time.perf_counter() - t0)
        stats_rows.append(row)
        if progress:
            progress(row)
        if out:
            _write_log(out / config.log_name, stats_rows)
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                save_policy(policy, out / f"checkpoint_epoch{epoch:04d}.evckpt")
        opt.lr *= config.lr_decay
    if out:
        save_policy(policy, out / "policy_final.evckpt")
    return stats_rows


def _write_log(path: Path, rows: list[EpochStats]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_cost", "baseline_cost", "grad_norm",
                         "infeasible_rate", "baseline_updated", "seconds"])
        for r in rows:
            writer.writerow([r.epoch, f"{r.mean_cost:.6f}", f"{r.baseline_cost:.6f}",
                             f"{r.grad_norm:.6f}", f"{r.infeasible_rate:.6f}",
                             int(r.baseline_updated), f"{r.seconds:.3f}"])
