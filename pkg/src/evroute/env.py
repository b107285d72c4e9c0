"""Constrained routing MDP: state, masking, transitions, reward, and an
independent replay checker for finished solutions.

One :class:`Rollout` owns one episode's mutable state. The reward of a move
is minus its travel time; recharging and waiting cost clock time but not
reward, so a solution's cost is exactly the summed travel time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .instance import Instance
from .kernels import KIND_DEPOT, KIND_STATION, mask_row

# Mask rule identifiers (reported on rejected actions and by the checker).
RULE_VISITED = "visited"
RULE_CARGO = "cargo"
RULE_DEPOT_REPEAT = "depot-repeat"
RULE_ENERGY = "energy"
RULE_TW = "time-window"
RULE_SELF = "self-visit"


@dataclass(frozen=True)
class EnvConfig:
    tw_hard: bool = True          # mask customers whose window would be missed
    depot_safe: bool = True       # depot counts as a recharge safe-harbor
    recharge_minutes: float = 60.0  # minutes for a full 0 -> capacity recharge


class MaskedActionError(ValueError):
    def __init__(self, rule: str, vehicle: int, node: int):
        super().__init__(f"action (vehicle {vehicle}, node {node}) violates rule {rule!r}")
        self.rule = rule


class UnservedError(RuntimeError):
    pass


@dataclass
class VehicleState:
    remaining_cargo: float
    remaining_energy: float
    location: int
    clock: float
    route: list[int] = field(default_factory=list)


@dataclass
class Solution:
    routes: list[list[int]]
    arrival_times: list[list[float]]
    energy_traces: list[list[float]]
    total_cost: float

    def to_dict(self) -> dict:
        return {"routes": [[int(i) for i in r] for r in self.routes],
                "arrival_times": self.arrival_times,
                "energy_traces": self.energy_traces,
                "total_cost": self.total_cost}

    @classmethod
    def from_dict(cls, doc: dict) -> "Solution":
        return cls(routes=[[int(i) for i in r] for r in doc["routes"]],
                   arrival_times=[list(map(float, a)) for a in doc["arrival_times"]],
                   energy_traces=[list(map(float, e)) for e in doc["energy_traces"]],
                   total_cost=float(doc["total_cost"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


@dataclass
class Verdict:
    ok: bool
    failures: list[str]
    cost: float | None = None

    def __bool__(self):
        return self.ok


class Rollout:
    """Single-owner mutable episode over one instance."""

    def __init__(self, instance: Instance, config: EnvConfig = EnvConfig()):
        self.instance = instance
        self.config = config
        self.vehicles = [
            VehicleState(v.cargo_capacity, v.battery_capacity, instance.depot, 0.0,
                         [instance.depot])
            for v in instance.fleet
        ]
        self.visited = np.zeros(instance.n_nodes, dtype=np.uint8)
        self.step_count = 0
        self.reward_sum = 0.0
        safe = list(instance.stations)
        if config.depot_safe:
            safe.append(instance.depot)
        # min energy to get from each node to any safe node (itself included)
        self.min_onward_ec = np.ascontiguousarray(instance.ec[:, safe].min(axis=1))
        # generous for any purposeful episode (serving all customers plus
        # recharge/reload detours) while cutting aimless wandering short
        self.max_steps = 2 * (instance.n_customers + 2) + 6 * instance.n_vehicles

    # -- queries -------------------------------------------------------

    @property
    def remaining(self) -> int:
        return int(len(self.instance.customers) - self.visited[self.instance.customers].sum())

    @property
    def complete(self) -> bool:
        return self.remaining == 0

    def build_mask(self, j: int) -> np.ndarray:
        """Masked-node row for vehicle j (1 = infeasible)."""
        inst = self.instance
        v = self.vehicles[j]
        return mask_row(inst.kind, self.visited, inst.demands, inst.tw_close,
                        np.ascontiguousarray(inst.ec[v.location]),
                        np.ascontiguousarray(inst.tt[v.location]),
                        self.min_onward_ec,
                        v.remaining_cargo, v.remaining_energy, v.clock,
                        v.location, v.location == inst.depot, self.config.tw_hard)

    def feasible_vehicles(self) -> list[int]:
        return [j for j in range(len(self.vehicles)) if not self.build_mask(j).all()]

    def deadlocked(self) -> bool:
        return (not self.complete and
                (self.step_count >= self.max_steps or not self.feasible_vehicles()))

    # -- transition ----------------------------------------------------

    def violated_rule(self, j: int, i: int) -> str | None:
        """Which mask rule (if any) forbids vehicle j moving to node i."""
        inst = self.instance
        v = self.vehicles[j]
        if i == v.location:
            return RULE_SELF
        if inst.kind[i] != KIND_DEPOT and self.visited[i] and i in inst.customers:
            return RULE_VISITED
        if inst.demands[i] > v.remaining_cargo:
            return RULE_CARGO
        if v.location == inst.depot and i == inst.depot:
            return RULE_DEPOT_REPEAT
        if v.remaining_energy < inst.ec[v.location, i] + self.min_onward_ec[i]:
            return RULE_ENERGY
        if (self.config.tw_hard and i in inst.customers
                and v.clock + inst.tt[v.location, i] > inst.tw_close[i]):
            return RULE_TW
        return None

    def step(self, j: int, i: int) -> float:
        """Move vehicle j to node i; returns the step reward (-travel time)."""
        rule = self.violated_rule(j, i)
        if rule is not None:
            raise MaskedActionError(rule, j, i)
        inst = self.instance
        v = self.vehicles[j]
        spec = inst.fleet[j]
        tt = inst.tt[v.location, i]
        v.remaining_energy -= inst.ec[v.location, i]
        v.clock = max(v.clock + tt, inst.tw_open[i])
        kind = inst.kind[i]
        if kind == KIND_STATION:
            deficit = spec.battery_capacity - v.remaining_energy
            rate = spec.battery_capacity / self.config.recharge_minutes
            v.clock += deficit / rate
            v.remaining_energy = spec.battery_capacity
        elif kind == KIND_DEPOT:
            v.remaining_cargo = spec.cargo_capacity
            v.remaining_energy = spec.battery_capacity
        else:
            v.remaining_cargo -= inst.demands[i]
            self.visited[i] = 1
        v.location = i
        v.route.append(i)
        self.step_count += 1
        reward = -tt
        self.reward_sum += reward
        return reward

    # -- termination ---------------------------------------------------

    def finalize(self) -> Solution:
        """Close every route with a depot return and emit the solution.

        A vehicle short on energy for the direct return leg recharges at
        reachable stations on the way.
        """
        if not self.complete:
            raise UnservedError(f"{self.remaining} customers still unserved")
        inst = self.instance
        cost = -self.reward_sum
        routes, arrivals, energies = [], [], []
        for j, v in enumerate(self.vehicles):
            cost += self._return_legs(j)
            routes.append(list(v.route))
        for j in range(len(self.vehicles)):
            arr, en = _replay_trace(inst, self.config, j, routes[j])
            arrivals.append(arr)
            energies.append(en)
        return Solution(routes=routes, arrival_times=arrivals,
                        energy_traces=energies, total_cost=cost)

    def _return_legs(self, j: int) -> float:
        inst = self.instance
        v = self.vehicles[j]
        spec = inst.fleet[j]
        extra = 0.0
        hops = 0
        while v.location != inst.depot:
            if hops > inst.n_nodes + 2:
                raise UnservedError(f"vehicle {j} cannot reach the depot")
            if v.remaining_energy >= inst.ec[v.location, inst.depot]:
                target = inst.depot
            else:
                reach = [s for s in inst.stations
                         if s != v.location and v.remaining_energy >= inst.ec[v.location, s]]
                if not reach:
                    raise UnservedError(f"vehicle {j} stranded at node {v.location}")
                target = min(reach, key=lambda s: inst.ec[v.location, s] + inst.ec[s, inst.depot])
            tt = inst.tt[v.location, target]
            v.remaining_energy -= inst.ec[v.location, target]
            v.clock += tt
            if target != inst.depot:
                deficit = spec.battery_capacity - v.remaining_energy
                v.clock += deficit / (spec.battery_capacity / self.config.recharge_minutes)
                v.remaining_energy = spec.battery_capacity
            v.location = target
            v.route.append(target)
            extra += tt
            hops += 1
        return extra


def _replay_trace(inst: Instance, config: EnvConfig, j: int, route: list[int]):
    """Arrival times and post-visit energies along a route (depot start)."""
    spec = inst.fleet[j]
    clock, energy = 0.0, spec.battery_capacity
    arrivals, energies = [0.0], [energy]
    for prev, cur in zip(route, route[1:]):
        clock = max(clock + inst.tt[prev, cur], inst.tw_open[cur])
        energy -= inst.ec[prev, cur]
        arrivals.append(clock)
        if inst.kind[cur] == KIND_STATION:
            deficit = spec.battery_capacity - energy
            clock += deficit / (spec.battery_capacity / config.recharge_minutes)
            energy = spec.battery_capacity
        elif inst.kind[cur] == KIND_DEPOT:
            energy = spec.battery_capacity
        energies.append(energy)
    return arrivals, energies


def solution_from_routes(instance: Instance, routes: list[list[int]],
                         config: EnvConfig = EnvConfig()) -> Solution:
    """Replay raw routes into a full Solution (no feasibility checking)."""
    cost = sum(instance.tt[a, b] for r in routes for a, b in zip(r, r[1:]))
    arrivals, energies = [], []
    for j, r in enumerate(routes):
        arr, en = _replay_trace(instance, config, j, r)
        arrivals.append(arr)
        energies.append(en)
    return Solution(routes=[list(r) for r in routes], arrival_times=arrivals,
                    energy_traces=energies, total_cost=float(cost))


def check_solution(instance: Instance, solution: Solution,
                   config: EnvConfig = EnvConfig()) -> Verdict:
    """Replay a solution from scratch against every constraint.

    Independent of Rollout's bookkeeping: only the instance matrices and the
    recharge model are used. Returns the first batch of violations found.
    """
    failures: list[str] = []
    served: dict[int, int] = {}
    cost = 0.0
    for j, route in enumerate(solution.routes):
        if j >= instance.n_vehicles:
            failures.append(f"route {j}: no such vehicle")
            continue
        spec = instance.fleet[j]
        if not route or route[0] != instance.depot:
            failures.append(f"vehicle {j}: route must start at the depot")
            continue
        cargo = spec.cargo_capacity
        energy = spec.battery_capacity
        clock = 0.0
        for k, (prev, cur) in enumerate(zip(route, route[1:])):
            if prev == instance.depot and cur == instance.depot:
                failures.append(f"vehicle {j} leg {k}: consecutive depot visits")
            if prev == cur:
                failures.append(f"vehicle {j} leg {k}: zero-length self move")
            cost += instance.tt[prev, cur]
            energy -= instance.ec[prev, cur]
            if energy < -1e-9:
                failures.append(f"vehicle {j} leg {k}: energy {energy:.3f} below zero")
            clock = max(clock + instance.tt[prev, cur], instance.tw_open[cur])
            kind = instance.kind[cur]
            if kind == KIND_STATION:
                deficit = spec.battery_capacity - energy
                clock += deficit / (spec.battery_capacity / config.recharge_minutes)
                energy = spec.battery_capacity
            elif kind == KIND_DEPOT:
                cargo = spec.cargo_capacity
                energy = spec.battery_capacity
            else:
                if config.tw_hard and clock > instance.tw_close[cur] + 1e-9:
                    failures.append(f"vehicle {j} leg {k}: arrives at customer {cur} "
                                    f"at {clock:.1f} after window close")
                cargo -= instance.demands[cur]
                if cargo < -1e-9:
                    failures.append(f"vehicle {j} leg {k}: cargo below zero")
                served[cur] = served.get(cur, 0) + 1
    for c in instance.customers:
        n = served.get(int(c), 0)
        if n == 0:
            failures.append(f"unserved customer {c}")
        elif n > 1:
            failures.append(f"customer {c} served {n} times")
    if solution.total_cost is not None and abs(cost - solution.total_cost) > 1e-9:
        failures.append(f"reported cost {solution.total_cost} != replayed cost {cost}")
    return Verdict(ok=not failures, failures=failures, cost=cost)
