"""End-to-end runs of the command-line interface via its main() entry."""

import json

import pytest

from evroute.cli import main


@pytest.fixture()
def instance_path(tmp_path):
    p = tmp_path / "inst.json"
    assert main(["generate", "--size", "5", "--seed", "3",
                 "--out", str(p)]) == 0
    return p


def test_generate_writes_valid_instance(instance_path):
    doc = json.loads(instance_path.read_text())
    assert "nodes" in doc and "fleet" in doc


def test_oracle(instance_path, capsys):
    assert main(["oracle", "--instance", str(instance_path)]) == 0
    out = capsys.readouterr().out
    assert "cost" in out and "vehicle 0" in out


def test_baseline(instance_path, capsys):
    assert main(["baseline", "--instance", str(instance_path)]) == 0
    assert "nearest-feasible cost" in capsys.readouterr().out


def test_train_then_solve_and_eval(tmp_path, instance_path, capsys):
    cfg = {"policy": {"d_h": 16, "d_e": 8, "n_heads": 2, "n_gat_layers": 1,
                      "n_edge_layers": 1, "d_ff": 32},
           "train": {"instance_size": 5, "batch_size": 8, "n_instances": 16,
                     "instances_per_epoch": 16, "eval_instances": 4}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    run_dir = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path),
                 "--out-dir", str(run_dir)]) == 0
    ckpt = run_dir / "policy_final.evckpt"
    assert ckpt.exists()

    sol_path = tmp_path / "sol.json"
    rc = main(["solve", "--instance", str(instance_path),
               "--policy", str(ckpt), "--decode", "sampling",
               "--samples", "16", "--out", str(sol_path)])
    out = capsys.readouterr().out
    if rc == 0:
        assert sol_path.exists()
        assert "cost" in out
    else:
        assert rc == 1 and "deadlock" in out

    eval_dir = tmp_path / "eval"
    assert main(["eval", "--policy", str(ckpt), "--sizes", "5",
                 "--methods", "nearest", "greedy", "--instances", "2",
                 "--out-dir", str(eval_dir)]) == 0
    assert (eval_dir / "results.csv").exists()


def test_missing_subcommand_errors():
    with pytest.raises(SystemExit):
        main([])
