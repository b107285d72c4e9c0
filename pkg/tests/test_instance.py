"""Instance generation invariants, the time-window adjacency oracle, and
JSON round-trips."""

import numpy as np
import pytest

from evroute.instance import (FLEET_PRESETS, Instance, NodeRecord, SchemaError,
                              Vehicle, build_adjacency, default_fleet,
                              generate_instance, instance_from_dict,
                              instance_to_dict, load_instance, save_instance)


def adjacency_oracle(tw_open, tw_close, tt, i, j):
    """A directed edge i->j is admissible iff some departure instant from i
    lies in i's window and lands inside j's window."""
    lo = max(tw_open[i], tw_open[j] - tt[i, j])
    hi = min(tw_close[i], tw_close[j] - tt[i, j])
    return 1 if (i == j or lo <= hi) else 0


def test_adjacency_matches_interval_oracle():
    for seed in range(30):
        inst = generate_instance(8, seed)
        adj = inst.adjacency
        for i in range(inst.n_nodes):
            for j in range(inst.n_nodes):
                assert adj[i, j] == adjacency_oracle(
                    inst.tw_open, inst.tw_close, inst.tt, i, j), (seed, i, j)


def test_adjacency_departure_scan():
    """Integer-minute departure scan agrees with the closed-form interval
    test whenever windows and travel times are integral."""
    inst = generate_instance(6, 11)
    tt = np.round(inst.tt)
    adj = build_adjacency(inst.nodes, tt)
    for i in range(inst.n_nodes):
        for j in range(inst.n_nodes):
            if i == j:
                continue
            feasible = any(
                inst.tw_open[j] <= t + tt[i, j] <= inst.tw_close[j]
                for t in range(int(inst.tw_open[i]), int(inst.tw_close[i]) + 1))
            assert adj[i, j] == int(feasible), (i, j)


class TestGeneration:
    def test_invariants_over_seeds(self):
        for seed in range(200):
            inst = generate_instance(7, seed)
            assert inst.n_customers == 7
            assert inst.n_stations >= 1
            assert inst.kind[0] == 0  # depot first
            assert np.all(inst.demands[inst.customers] >= 1)
            assert np.all(inst.demands[inst.customers] <= 9)
            cust = inst.customers
            dur = inst.tw_close[cust] - inst.tw_open[cust]
            assert np.all(dur >= 60) and np.all(dur <= 180)
            assert np.all(inst.tw_open[cust] >= 0)
            assert np.all(inst.tw_open[cust] <= 720)
            # symmetric metric travel times
            np.testing.assert_allclose(inst.tt, inst.tt.T)
            assert np.all(np.diag(inst.tt) == 0)

    def test_same_seed_reproducible(self):
        a = generate_instance(10, 42)
        b = generate_instance(10, 42)
        np.testing.assert_array_equal(a.tt, b.tt)
        np.testing.assert_array_equal(a.demands, b.demands)

    def test_station_ratio(self):
        inst = generate_instance(20, 0, station_ratio=0.2)
        assert inst.n_stations == 4

    def test_fleet_presets(self):
        for n, (fleet, n_stations) in FLEET_PRESETS.items():
            inst = generate_instance(n, 0)
            assert inst.n_vehicles == len(fleet)
            assert inst.n_stations == n_stations

    def test_default_fleet_small(self):
        fleet, n_stations = default_fleet(10)
        assert len(fleet) == 2 and n_stations == 1


class TestSerialization:
    def test_round_trip(self, tmp_path):
        inst = generate_instance(9, 5)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        back = load_instance(path)
        np.testing.assert_allclose(back.tt, inst.tt)
        np.testing.assert_allclose(back.ec, inst.ec)
        np.testing.assert_array_equal(back.adjacency, inst.adjacency)
        np.testing.assert_array_equal(back.demands, inst.demands)
        assert [v.cargo_capacity for v in back.fleet] == \
               [v.cargo_capacity for v in inst.fleet]

    def test_dict_round_trip(self):
        inst = generate_instance(4, 1)
        back = instance_from_dict(instance_to_dict(inst))
        np.testing.assert_allclose(back.tt, inst.tt)

    def test_schema_errors(self):
        inst = generate_instance(4, 1)
        doc = instance_to_dict(inst)
        bad = dict(doc)
        del bad["nodes"]
        with pytest.raises((SchemaError, KeyError)):
            instance_from_dict(bad)

    def test_validation_rejects_negative_window(self):
        nodes = [NodeRecord(0, 0, 0, 0, 100, "depot"),
                 NodeRecord(1, 1, 1, 50, 40, "customer")]  # closes before it opens
        with pytest.raises(SchemaError):
            Instance(t_max=900.0, nodes=nodes, demands=np.array([0.0, 1.0]),
                     fleet=[Vehicle(100.0, 10.0)],
                     tt=np.array([[0.0, 1.0], [1.0, 0.0]]),
                     ec=np.array([[0.0, 1.0], [1.0, 0.0]]))
