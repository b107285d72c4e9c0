"""Cross-checks between the compiled kernels and the pure-Python fallback,
and the import-time backend selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from evroute.env import Rollout
from evroute.instance import generate_instance
from evroute.kernels import BACKEND, _pure

_fast = pytest.importorskip("evroute.kernels._fast")


def _mask_args(instance, rollout, j):
    v = rollout.vehicles[j]
    return (instance.kind, rollout.visited, instance.demands,
            instance.tw_close,
            np.ascontiguousarray(instance.ec[v.location]),
            np.ascontiguousarray(instance.tt[v.location]),
            rollout.min_onward_ec, v.remaining_cargo, v.remaining_energy,
            v.clock, v.location, v.location == instance.depot,
            rollout.config.tw_hard)


@pytest.mark.parametrize("size", [5, 12, 30])
def test_adjacency_backends_agree(size):
    for seed in range(20):
        inst = generate_instance(size, seed)
        a = np.asarray(_pure.adjacency_matrix(inst.tw_open, inst.tw_close, inst.tt))
        b = np.asarray(_fast.adjacency_matrix(inst.tw_open, inst.tw_close, inst.tt))
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("size", [5, 12, 30])
def test_mask_backends_agree_along_rollouts(size):
    rng = np.random.default_rng(size)
    for seed in range(10):
        inst = generate_instance(size, seed)
        roll = Rollout(inst)
        for _ in range(3 * size):
            if roll.complete:
                break
            moves = []
            for j in range(inst.n_vehicles):
                args = _mask_args(inst, roll, j)
                ma = np.asarray(_pure.mask_row(*args))
                mb = np.asarray(_fast.mask_row(*args))
                np.testing.assert_array_equal(ma, mb)
                moves += [(j, i) for i in np.flatnonzero(ma == 0)]
            if not moves:
                break
            j, i = moves[rng.integers(len(moves))]
            roll.step(j, i)


def test_compiled_backend_selected_by_default():
    assert BACKEND == "compiled"


def test_pure_backend_env_var():
    out = subprocess.run(
        [sys.executable, "-c",
         "from evroute.kernels import BACKEND; print(BACKEND)"],
        env={**os.environ, "EVROUTE_PURE": "1"},
        capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
