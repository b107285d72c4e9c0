"""Timing comparison of the compiled kernels against the pure-Python
fallback.

Both backends are imported directly (bypassing the import-time selection)
and checked for agreement before timing. Run:

    python3 benchmarks/bench_kernels.py [--sizes 10 20 50 100] [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from evroute.instance import generate_instance
from evroute.env import Rollout
from evroute.kernels import _pure

try:
    from evroute.kernels import _fast
except ImportError:
    _fast = None


def _mask_args(instance, rollout, j):
    v = rollout.vehicles[j]
    return (instance.kind, rollout.visited, instance.demands,
            instance.tw_close,
            np.ascontiguousarray(instance.ec[v.location]),
            np.ascontiguousarray(instance.tt[v.location]),
            rollout.min_onward_ec, v.remaining_cargo, v.remaining_energy,
            v.clock, v.location, v.location == instance.depot,
            rollout.config.tw_hard)


def bench_backend(mod, name, instances, repeats):
    adj_args = [(i.tw_open, i.tw_close, i.tt) for i in instances]
    mask_args = []
    for inst in instances:
        r = Rollout(inst)
        mask_args.append(_mask_args(inst, r, 0))

    t0 = time.perf_counter()
    for _ in range(repeats):
        for a in adj_args:
            mod.adjacency_matrix(*a)
    adj_t = (time.perf_counter() - t0) / (repeats * len(instances))

    t0 = time.perf_counter()
    for _ in range(repeats):
        for a in mask_args:
            mod.mask_row(*a)
    mask_t = (time.perf_counter() - t0) / (repeats * len(instances))
    return adj_t, mask_t


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 50, 100])
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()

    if _fast is None:
        print("compiled backend unavailable; timing the pure backend only")

    print(f"{'size':>5} {'kernel':>10} {'pure (us)':>10} {'compiled (us)':>14} {'speedup':>8}")
    for size in args.sizes:
        instances = [generate_instance(size, s) for s in range(5)]
        # cross-check before timing
        if _fast is not None:
            for inst in instances:
                a = _pure.adjacency_matrix(inst.tw_open, inst.tw_close, inst.tt)
                b = _fast.adjacency_matrix(inst.tw_open, inst.tw_close, inst.tt)
                assert np.array_equal(np.asarray(a), np.asarray(b))
                r = Rollout(inst)
                ma = _pure.mask_row(*_mask_args(inst, r, 0))
                mb = _fast.mask_row(*_mask_args(inst, r, 0))
                assert np.array_equal(np.asarray(ma), np.asarray(mb))
        pure = bench_backend(_pure, "pure", instances, args.repeats)
        fast = bench_backend(_fast, "compiled", instances, args.repeats) \
            if _fast is not None else (float("nan"), float("nan"))
        for k, kernel in enumerate(("adjacency", "mask_row")):
            speedup = pure[k] / fast[k] if _fast is not None else float("nan")
            print(f"{size:>5} {kernel:>10} {1e6 * pure[k]:>10.2f} "
                  f"{1e6 * fast[k]:>14.2f} {speedup:>7.1f}x")


if __name__ == "__main__":
    main()
