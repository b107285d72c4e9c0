"""Command-line entry point.

    evroute generate    write a random instance to JSON
    evroute train       REINFORCE training, checkpoints + log to a directory
    evroute solve       decode one instance with a trained policy
    evroute eval        method-comparison table over fresh instances
    evroute ablate      train + compare the four architecture variants
    evroute ratio-sweep greedy decode across station-to-customer ratios
    evroute oracle      exact solver on a small instance
    evroute baseline    heuristic solvers on one instance
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baselines import ExactConfig, local_search, nearest_feasible, solve_exact
from .bench import BenchConfig, run_ablation, run_bench, run_ratio_sweep
from .checkpoint import load_policy, save_policy
from .env import EnvConfig, check_solution
from .instance import generate_instance, load_instance, save_instance
from .policy import Policy, PolicyConfig, decode
from .train import TrainConfig, train


def _env_config(args) -> EnvConfig:
    return EnvConfig(tw_hard=not args.tw_soft, depot_safe=not args.no_depot_safe)


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tw-soft", action="store_true",
                   help="disable hard time-window masking")
    p.add_argument("--no-depot-safe", action="store_true",
                   help="exclude the depot from the energy safety reserve")


def _load_json(path: str | None) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def cmd_generate(args) -> int:
    inst = generate_instance(args.size, args.seed, n_stations=args.stations,
                             station_ratio=args.ratio)
    save_instance(inst, args.out)
    print(f"wrote {args.out}: {inst.n_customers} customers, "
          f"{inst.n_stations} stations, {inst.n_vehicles} vehicles")
    return 0


def cmd_train(args) -> int:
    doc = _load_json(args.config)
    policy_cfg = PolicyConfig(**doc.get("policy", {}))
    train_cfg = TrainConfig(**doc.get("train", {}))
    if args.size is not None:
        train_cfg.instance_size = args.size
    if args.instances is not None:
        train_cfg.n_instances = args.instances
    if args.seed is not None:
        train_cfg.seed = args.seed
    policy = Policy(policy_cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train_config.json").write_text(json.dumps(
        {"policy": policy_cfg.to_dict(), "train": train_cfg.__dict__}, indent=1))
    stats = train(policy, train_cfg, _env_config(args), out_dir=str(out),
                  progress=lambda s: print(
                      f"epoch {s.epoch}: cost {s.mean_cost:.1f} "
                      f"infeasible {s.infeasible_rate:.2f} "
                      f"baseline_updated {s.baseline_updated}", flush=True))
    print(f"done: {len(stats)} epochs, checkpoint {out / 'policy_final.evckpt'}")
    return 0


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    policy = load_policy(args.policy)
    env = _env_config(args)
    res = decode(policy, inst, mode=args.decode, n_samples=args.samples,
                 seed=args.seed, env_config=env)
    if not res.feasible:
        print(f"deadlock: {res.reason} ({res.unserved} customers unserved)")
        return 1
    verdict = check_solution(inst, res.solution, env)
    if not verdict.ok:
        print("internal error: decoded solution failed verification:")
        for f in verdict.failures:
            print(f"  {f}")
        return 2
    print(f"cost {res.cost:.3f}")
    for j, route in enumerate(res.solution.routes):
        print(f"vehicle {j}: " + " -> ".join(map(str, route)))
    if args.out:
        res.solution.save(args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = BenchConfig(sizes=args.sizes, methods=args.methods,
                      n_instances=args.instances, n_samples=args.samples,
                      seed=args.seed, out_dir=args.out_dir)
    policy = load_policy(args.policy) if args.policy else None
    rows = run_bench(cfg, policy, _env_config(args))
    for r in rows:
        print(f"{r.method:>12} size {r.size:>3}: mean {r.mean_cost:9.1f} "
              f"gap {100 * r.gap:6.2f}% infeasible {r.infeasible}")
    if args.out_dir:
        print(f"wrote {Path(args.out_dir) / 'results.csv'}")
    return 0


ABLATION_VARIANTS = {
    "full": {},
    "no-ee": {"use_ee": False},
    "no-twe": {"use_twe": False},
    "no-hd": {"use_hd": False},
}


def cmd_ablate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = _load_json(args.config)
    env = _env_config(args)
    policies, budgets = {}, {}
    if args.checkpoints:
        if len(args.checkpoints) != len(ABLATION_VARIANTS):
            print(f"need {len(ABLATION_VARIANTS)} checkpoints "
                  f"({', '.join(ABLATION_VARIANTS)})", file=sys.stderr)
            return 2
        for name, path in zip(ABLATION_VARIANTS, args.checkpoints):
            policies[name] = load_policy(path)
    else:
        base_policy = doc.get("policy", {})
        train_cfg_doc = doc.get("train", {})
        train_cfg_doc.setdefault("n_instances", args.instances or 4000)
        for name, overrides in ABLATION_VARIANTS.items():
            print(f"training variant {name} ...", flush=True)
            policy = Policy(PolicyConfig(**{**base_policy, **overrides}))
            cfg = TrainConfig(**train_cfg_doc)
            train(policy, cfg, env, out_dir=None)
            save_policy(policy, out / f"policy_{name}.evckpt")
            policies[name] = policy
            budgets[name] = cfg.n_instances
    bench_cfg = BenchConfig(sizes=args.sizes, methods=["greedy"],
                            n_instances=args.eval_instances, seed=args.seed,
                            out_dir=str(out))
    rows = run_ablation(policies, bench_cfg, env, budgets=budgets or None)
    for r in rows:
        print(f"{r.method:>8} size {r.size:>3}: mean {r.mean_cost:9.1f} "
              f"gap {100 * r.gap:6.2f}% infeasible {r.infeasible} "
              f"params {policies[r.method].n_params()}")
    return 0


def cmd_ratio_sweep(args) -> int:
    policy = load_policy(args.policy)
    cfg = BenchConfig(ratios=args.ratios, sweep_size=args.size,
                      n_instances=args.instances, seed=args.seed,
                      out_dir=args.out_dir)
    rows = run_ratio_sweep(policy, cfg, _env_config(args))
    for r in rows:
        print(f"{r.method:>12}: mean {r.mean_cost:9.1f} gap {100 * r.gap:6.2f}% "
              f"infeasible {r.infeasible}")
    return 0


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    res = solve_exact(inst, ExactConfig(max_customers=args.max_customers),
                      _env_config(args))
    if res.solution is None:
        print(f"no solution: {res.reason or 'infeasible'}")
        return 1
    print(f"optimal cost {res.cost:.3f}" if res.optimal
          else f"cost {res.cost:.3f} (not proven optimal: {res.reason})")
    for j, route in enumerate(res.solution.routes):
        print(f"vehicle {j}: " + " -> ".join(map(str, route)))
    if args.out:
        res.solution.save(args.out)
    return 0


def cmd_baseline(args) -> int:
    inst = load_instance(args.instance)
    env = _env_config(args)
    sol = nearest_feasible(inst, env)
    if sol is None:
        print("nearest-feasible heuristic deadlocked")
        return 1
    print(f"nearest-feasible cost {sol.total_cost:.3f}")
    if args.method == "local-search":
        sol = local_search(sol, inst, env_config=env)
        print(f"after local search  {sol.total_cost:.3f}")
    if args.out:
        sol.save(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evroute",
                                description="EV fleet routing laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance to JSON")
    g.add_argument("--size", type=int, required=True, help="number of customers")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--stations", type=int, default=None)
    g.add_argument("--ratio", type=float, default=None,
                   help="stations as a fraction of customers")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a policy")
    t.add_argument("--config", help="JSON with 'policy' and 'train' sections")
    t.add_argument("--size", type=int, default=None)
    t.add_argument("--instances", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out-dir", required=True)
    _add_env_flags(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="decode one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--policy", required=True, help="checkpoint path")
    s.add_argument("--decode", choices=["greedy", "sampling"], default="greedy")
    s.add_argument("--samples", type=int, default=128)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the solution JSON here")
    _add_env_flags(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="method comparison table")
    e.add_argument("--policy", help="checkpoint (needed for greedy/sampling)")
    e.add_argument("--sizes", type=int, nargs="+", default=[6, 10])
    e.add_argument("--methods", nargs="+",
                   default=["greedy", "sampling", "nearest"])
    e.add_argument("--instances", type=int, default=100)
    e.add_argument("--samples", type=int, default=128)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out-dir")
    _add_env_flags(e)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="train and compare architecture variants")
    a.add_argument("--config", help="JSON with base 'policy'/'train' sections")
    a.add_argument("--checkpoints", nargs="+",
                   help="pre-trained checkpoints: full no-ee no-twe no-hd")
    a.add_argument("--instances", type=int, default=None,
                   help="training instances per variant")
    a.add_argument("--eval-instances", type=int, default=50)
    a.add_argument("--sizes", type=int, nargs="+", default=[10])
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out-dir", required=True)
    _add_env_flags(a)
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("ratio-sweep", help="vary the station-to-customer ratio")
    r.add_argument("--policy", required=True)
    r.add_argument("--ratios", type=float, nargs="+",
                   default=[0.02, 0.05, 0.10, 0.20])
    r.add_argument("--size", type=int, default=20)
    r.add_argument("--instances", type=int, default=50)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out-dir")
    _add_env_flags(r)
    r.set_defaults(func=cmd_ratio_sweep)

    o = sub.add_parser("oracle", help="exact solver (small instances)")
    o.add_argument("--instance", required=True)
    o.add_argument("--max-customers", type=int, default=8)
    o.add_argument("--out")
    _add_env_flags(o)
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("baseline", help="heuristic solvers")
    b.add_argument("--instance", required=True)
    b.add_argument("--method", choices=["nearest", "local-search"],
                   default="local-search")
    b.add_argument("--out")
    _add_env_flags(b)
    b.set_defaults(func=cmd_baseline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
