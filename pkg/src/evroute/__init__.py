"""Solver laboratory for the heterogeneous electric vehicle routing problem
with time windows: synthetic instances, a constrained routing MDP, a
dual-attention construction policy trained with REINFORCE, and exact /
heuristic baselines for verification."""

from .instance import Instance, generate_instance, load_instance, save_instance
from .env import EnvConfig, Rollout, Solution, check_solution
from .policy import Policy, PolicyConfig, decode
from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = [
    "EnvConfig",
    "Instance",
    "Policy",
    "PolicyConfig",
    "Rollout",
    "Solution",
    "check_solution",
    "decode",
    "generate_instance",
    "kernel_backend",
    "load_instance",
    "save_instance",
    "__version__",
]
