"""Benchmark harness: row structure, byte-level determinism of results.csv,
gap anchoring, and input validation."""

import pytest

from evroute.bench import BenchConfig, run_ablation, run_bench, run_ratio_sweep
from evroute.policy import Policy, PolicyConfig

TINY = PolicyConfig(d_h=16, d_e=8, n_heads=2, n_gat_layers=1,
                    n_edge_layers=1, d_ff=32)


@pytest.fixture(scope="module")
def policy():
    return Policy(TINY)


class TestRunBench:
    def test_rows_and_gap_anchor(self, policy):
        cfg = BenchConfig(sizes=[5], methods=["nearest", "exact"],
                          n_instances=3, seed=1)
        rows = run_bench(cfg, policy)
        assert {(r.method, r.size) for r in rows} == {("nearest", 5), ("exact", 5)}
        by = {r.method: r for r in rows}
        assert by["exact"].gap == pytest.approx(0.0)   # exact anchors the gap
        assert by["nearest"].gap >= -1e-9

    def test_results_csv_reproducible(self, policy, tmp_path):
        outs = []
        for name in ("a", "b"):
            cfg = BenchConfig(sizes=[5], methods=["greedy", "nearest"],
                              n_instances=3, seed=2,
                              out_dir=str(tmp_path / name))
            run_bench(cfg, policy)
            outs.append((tmp_path / name / "results.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_no_timing_in_results_csv(self, policy, tmp_path):
        cfg = BenchConfig(sizes=[5], methods=["nearest"], n_instances=2,
                          seed=0, out_dir=str(tmp_path))
        run_bench(cfg, policy)
        header = (tmp_path / "results.csv").read_text().splitlines()[0]
        assert "second" not in header and "time" not in header
        assert (tmp_path / "timings.csv").exists()
        assert (tmp_path / "summary.md").exists()
        assert (tmp_path / "run_metadata.json").exists()

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            BenchConfig(methods=["simulated-annealing"])

    def test_policy_required_for_nn_methods(self):
        cfg = BenchConfig(sizes=[5], methods=["greedy"], n_instances=1)
        with pytest.raises(ValueError):
            run_bench(cfg, policy=None)


class TestAblation:
    def test_four_variants_with_budget_warning(self, tmp_path):
        policies = {
            "full": Policy(TINY),
            "no-ee": Policy(PolicyConfig(**{**TINY.to_dict(), "use_ee": False})),
            "no-twe": Policy(PolicyConfig(**{**TINY.to_dict(), "use_twe": False})),
            "no-hd": Policy(PolicyConfig(**{**TINY.to_dict(), "use_hd": False})),
        }
        cfg = BenchConfig(sizes=[5], methods=["greedy"], n_instances=2,
                          seed=0, out_dir=str(tmp_path))
        rows = run_ablation(policies, cfg,
                            budgets={"full": 100, "no-ee": 50,
                                     "no-twe": 100, "no-hd": 100})
        assert len(rows) == 4
        summary = (tmp_path / "summary.md").read_text()
        assert "budgets differ" in summary
        import json
        meta = json.loads((tmp_path / "run_metadata.json").read_text())
        counts = meta["param_counts"]
        assert all(counts["full"] > counts[k] for k in counts if k != "full")


class TestRatioSweep:
    def test_rows_per_ratio(self, policy):
        cfg = BenchConfig(ratios=[0.1, 0.2], sweep_size=10, n_instances=2,
                          seed=0)
        rows = run_ratio_sweep(policy, cfg)
        assert [r.method for r in rows] == ["ratio-0.1", "ratio-0.2"]
        assert min(r.gap for r in rows) == pytest.approx(0.0)

    def test_zero_station_ratio_rejected(self, policy):
        cfg = BenchConfig(ratios=[0.02], sweep_size=10, n_instances=1)
        with pytest.raises(ValueError):
            run_ratio_sweep(policy, cfg)
