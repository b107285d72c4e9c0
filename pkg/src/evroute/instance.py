"""Problem description for the heterogeneous electric VRP with time windows.

An :class:`Instance` holds the node set (one depot, customers, charging
stations), integer demands, the heterogeneous fleet, dense travel-time and
energy matrices, and the time-window reachability adjacency. Instances are
immutable after construction and safe to share across parallel rollouts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import KIND_CUSTOMER, KIND_DEPOT, KIND_STATION, adjacency_matrix

SCHEMA_VERSION = 1
DEFAULT_T_MAX = 900.0

_KIND_NAMES = {KIND_DEPOT: "depot", KIND_CUSTOMER: "customer", KIND_STATION: "station"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


class SchemaError(ValueError):
    """Raised for malformed or inconsistent instance files."""


@dataclass(frozen=True)
class NodeRecord:
    id: int
    x: float
    y: float
    tw_open: float
    tw_close: float
    kind: str  # depot | customer | station


@dataclass(frozen=True)
class Vehicle:
    battery_capacity: float  # kWh
    cargo_capacity: float    # units


@dataclass
class Instance:
    t_max: float
    nodes: list[NodeRecord]
    demands: np.ndarray          # (n,) float64, zero off customers
    fleet: list[Vehicle]
    tt: np.ndarray               # (n, n) minutes
    ec: np.ndarray               # (n, n) kWh
    adjacency: np.ndarray = field(default=None)  # (n, n) uint8

    def __post_init__(self):
        self.demands = np.ascontiguousarray(self.demands, dtype=np.float64)
        self.tt = np.ascontiguousarray(self.tt, dtype=np.float64)
        self.ec = np.ascontiguousarray(self.ec, dtype=np.float64)
        self.validate()
        if self.adjacency is None:
            self.adjacency = build_adjacency(self.nodes, self.tt)
        self.kind = np.ascontiguousarray(
            [_KIND_CODES[nd.kind] for nd in self.nodes], dtype=np.int64)
        self.tw_open = np.ascontiguousarray([nd.tw_open for nd in self.nodes])
        self.tw_close = np.ascontiguousarray([nd.tw_close for nd in self.nodes])
        self.xy = np.array([[nd.x, nd.y] for nd in self.nodes])
        self.customers = np.flatnonzero(self.kind == KIND_CUSTOMER)
        self.stations = np.flatnonzero(self.kind == KIND_STATION)

    # -- derived sizes -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_customers(self) -> int:
        return int((self.kind == KIND_CUSTOMER).sum())

    @property
    def n_stations(self) -> int:
        return int((self.kind == KIND_STATION).sum())

    @property
    def n_vehicles(self) -> int:
        return len(self.fleet)

    @property
    def depot(self) -> int:
        return 0

    def validate(self):
        n = len(self.nodes)
        if n < 2:
            raise SchemaError("instance needs a depot and at least one customer")
        if self.nodes[0].kind != "depot":
            raise SchemaError("node 0 must be the depot")
        if sum(nd.kind == "depot" for nd in self.nodes) != 1:
            raise SchemaError("exactly one depot is required")
        for i, nd in enumerate(self.nodes):
            if nd.id != i:
                raise SchemaError(f"node ids must be 0..n-1 in order, got {nd.id} at {i}")
            if nd.kind not in _KIND_CODES:
                raise SchemaError(f"unknown node kind {nd.kind!r}")
            if not (0 <= nd.tw_open <= nd.tw_close <= self.t_max):
                raise SchemaError(f"node {i}: window [{nd.tw_open}, {nd.tw_close}] "
                                  f"violates 0 <= open <= close <= t_max={self.t_max}")
            if nd.kind != "customer" and (nd.tw_open != 0 or nd.tw_close != self.t_max):
                raise SchemaError(f"node {i}: depot/station window must span [0, t_max]")
        if self.demands.shape != (n,):
            raise SchemaError("demand vector length mismatch")
        for m, name in ((self.tt, "tt_matrix"), (self.ec, "ec_matrix")):
            if m.shape != (n, n):
                raise SchemaError(f"{name} must be {n}x{n}, got {m.shape}")
            if (m < 0).any():
                raise SchemaError(f"{name} has negative entries")
            if np.diagonal(m).any():
                raise SchemaError(f"{name} diagonal must be zero")
        if not self.fleet:
            raise SchemaError("fleet must contain at least one vehicle")
        max_cargo = max(v.cargo_capacity for v in self.fleet)
        for v in self.fleet:
            if v.battery_capacity <= 0 or v.cargo_capacity <= 0:
                raise SchemaError("vehicle capacities must be positive")
        for i, nd in enumerate(self.nodes):
            d = self.demands[i]
            if nd.kind == "customer":
                if not (0 < d <= max_cargo):
                    raise SchemaError(f"customer {i}: demand {d} outside (0, max cargo]")
            elif d != 0:
                raise SchemaError(f"non-customer node {i} must have zero demand")


def build_adjacency(nodes: list[NodeRecord], tt: np.ndarray) -> np.ndarray:
    """a_ij = 1 iff a departure inside i's window can arrive inside j's window:
    max(tw_open_i, tw_open_j - tt_ij) <= min(tw_close_i, tw_close_j - tt_ij).
    Self-loops are set to 1 so attention over neighbours is always defined.
    """
    tw_open = np.ascontiguousarray([nd.tw_open for nd in nodes], dtype=np.float64)
    tw_close = np.ascontiguousarray([nd.tw_close for nd in nodes], dtype=np.float64)
    return adjacency_matrix(tw_open, tw_close, np.ascontiguousarray(tt, dtype=np.float64))


# -- synthetic generation ---------------------------------------------

# Fleet / station presets for the benchmark sizes.
FLEET_PRESETS = {
    20: ([Vehicle(450.0, 20.0), Vehicle(500.0, 30.0), Vehicle(550.0, 40.0)], 3),
    50: ([Vehicle(400.0 + 50.0 * j, 20.0 + 10.0 * j) for j in range(5)], 5),
    100: ([Vehicle(375.0 + 25.0 * j, 25.0 + 5.0 * j) for j in range(11)], 11),
}


def default_fleet(n_customers: int) -> tuple[list[Vehicle], int]:
    """Preset fleet for benchmark sizes; a scaled-down fleet otherwise."""
    if n_customers in FLEET_PRESETS:
        return FLEET_PRESETS[n_customers]
    nv = max(2, round(n_customers / 10) + 1)
    fleet = [Vehicle(400.0 + 50.0 * j, 20.0 + 10.0 * j) for j in range(nv)]
    n_stations = max(1, round(0.1 * n_customers))
    return fleet, n_stations


def generate_instance(n_customers: int, seed: int, *, fleet=None,
                      n_stations: int | None = None,
                      station_ratio: float | None = None,
                      coord_scale: float = 50.0, speed: float = 1.0,
                      energy_per_km: float = 1.0,
                      t_max: float = DEFAULT_T_MAX) -> Instance:
    """Synthetic instance: coordinates uniform on a `coord_scale` km square,
    integer demands U{1..9}, window starts U{0..720} with durations U{60..180},
    travel time dist/speed and energy `energy_per_km`*dist. Same seed gives a
    bit-identical instance.
    """
    preset_fleet, preset_stations = default_fleet(n_customers)
    if fleet is None:
        fleet = preset_fleet
    for v in fleet:
        if v.battery_capacity <= 0 or v.cargo_capacity <= 0:
            raise ValueError("fleet capacities must be positive")
    if station_ratio is not None:
        n_stations = round(station_ratio * n_customers)
        if n_stations < 1:
            raise ValueError(f"station_ratio {station_ratio} yields zero stations")
    elif n_stations is None:
        n_stations = preset_stations

    rng = np.random.default_rng(seed)
    n = 1 + n_customers + n_stations
    xy = rng.uniform(0.0, coord_scale, size=(n, 2))

    nodes = [NodeRecord(0, xy[0, 0], xy[0, 1], 0.0, t_max, "depot")]
    for i in range(1, 1 + n_customers):
        start = float(rng.integers(0, 721))
        dur = float(rng.integers(60, 181))
        nodes.append(NodeRecord(i, xy[i, 0], xy[i, 1], start,
                                min(start + dur, t_max), "customer"))
    for i in range(1 + n_customers, n):
        nodes.append(NodeRecord(i, xy[i, 0], xy[i, 1], 0.0, t_max, "station"))

    demands = np.zeros(n)
    demands[1:1 + n_customers] = rng.integers(1, 10, size=n_customers)

    dist = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=-1)
    np.fill_diagonal(dist, 0.0)
    return Instance(t_max=t_max, nodes=nodes, demands=demands, fleet=list(fleet),
                    tt=dist / speed, ec=energy_per_km * dist)


# -- serialization ----------------------------------------------------


def instance_to_dict(inst: Instance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "t_max": inst.t_max,
        "nodes": [{"id": nd.id, "x": nd.x, "y": nd.y, "tw_open": nd.tw_open,
                   "tw_close": nd.tw_close, "kind": nd.kind} for nd in inst.nodes],
        "demands": inst.demands.tolist(),
        "fleet": [{"battery_capacity": v.battery_capacity,
                   "cargo_capacity": v.cargo_capacity} for v in inst.fleet],
        "tt_matrix": inst.tt.tolist(),
        "ec_matrix": inst.ec.tolist(),
    }


def instance_from_dict(doc: dict) -> Instance:
    try:
        version = doc["schema_version"]
        if version != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {version}")
        nodes = [NodeRecord(int(nd["id"]), float(nd["x"]), float(nd["y"]),
                            float(nd["tw_open"]), float(nd["tw_close"]),
                            str(nd["kind"])) for nd in doc["nodes"]]
        fleet = [Vehicle(float(v["battery_capacity"]), float(v["cargo_capacity"]))
                 for v in doc["fleet"]]
        inst = Instance(t_max=float(doc["t_max"]), nodes=nodes,
                        demands=np.asarray(doc["demands"], dtype=np.float64),
                        fleet=fleet,
                        tt=np.asarray(doc["tt_matrix"], dtype=np.float64),
                        ec=np.asarray(doc["ec_matrix"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed instance document: {exc}") from exc
    return inst


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1))


def load_instance(path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return instance_from_dict(doc)
