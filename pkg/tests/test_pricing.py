import random

import pytest

from cargo_recovery.aircraft_pricing import (AircraftLabel, aircraft_frontiers, dominate_aircraft,
                                             enumerate_aircraft_strings, price_aircraft, process_arc_aircraft,
                                             string_label_cost)
from cargo_recovery.cargo_pricing import (CargoLabel, cargo_frontiers, cargo_options, dominate_cargo,
                                          enumerate_cargo_itineraries, itinerary_label_cost, price_cargo, sink_value)
from cargo_recovery.domain import (Aircraft, Airport, CargoOrder, ConnectionRule, Flight, Scenario, Schedule)
from cargo_recovery.instance import compile_scenario
from cargo_recovery.master import DualValues
from cargo_recovery.registry import TimeRegistry
from cargo_recovery.scenarios import GeneratorConfig, generate_scenario, micro_scenario

ZERO = DualValues()


def network(flights, aircraft, cargo=(), turn=80, trans=120):
    airports = {c: Airport(c) for f in flights for c in (f.origin, f.destination)}
    sched = Schedule(airports, {a.id: a for a in aircraft}, {f.id: f for f in flights}, {o.id: o for o in cargo},
                     ConnectionRule(default_turn=turn, trans_time=trans))
    return compile_scenario(Scenario(sched, horizon=(0, 2000)))


# --- aircraft ----------------------------------------------------------------------


def test_original_string_is_not_improving_at_zero_duals():
    scn = generate_scenario(GeneratorConfig(n_disruptions=0, seed=3))
    inst = compile_scenario(scn)
    reg = TimeRegistry(inst)
    for a in inst.aircraft:
        assert price_aircraft(inst, a, ZERO, reg) == []


def test_swap_against_cover_dual():
    inst = network([Flight("f1", "X", "Y", 0, 60)],
                   [Aircraft("A", "N", 10, "X", 0, ("f1",)), Aircraft("B", "N", 10, "X", 0, ())])
    found = price_aircraft(inst, "B", DualValues(alpha={"f1": 100.0}), TimeRegistry(inst))
    assert [(p.column.legs, p.reduced_cost) for p in found] == [((("f1", 0),), pytest.approx(-60.0))]


def test_negative_aircraft_dual_blocks_original_string():
    inst = network([Flight("f1", "X", "Y", 0, 60)], [Aircraft("A", "N", 10, "X", 0, ("f1",))])
    duals = DualValues(beta={"A": -10.0})
    assert string_label_cost(inst, "A", (("f1", 0),), duals) == pytest.approx(10.0)
    assert price_aircraft(inst, "A", duals, TimeRegistry(inst)) == []


@pytest.mark.parametrize("t_j0,expected_t,expected_delay", [(200, 250, 50), (260, 260, 0)])
def test_extension_respects_turn(t_j0, expected_t, expected_delay):
    inst = network([Flight("i", "X", "Y", 100, 120), Flight("j", "Y", "X", t_j0, 60)],
                   [Aircraft("A", "N", 10, "X", 0, ("i", "j"))], turn=30)
    start = AircraftLabel(0.0, 0, "i", 100)
    (lab,) = process_arc_aircraft(inst, "A", "i", "j", [start], [t_j0], ZERO)
    assert (lab.time, lab.delay) == (expected_t, expected_delay)


def test_delay_cost_on_label():
    inst = network([Flight("i", "X", "Y", 100, 120), Flight("j", "Y", "X", 200, 60)],
                   [Aircraft("A", "N", 10, "X", 0, ("i", "j"))], turn=30)
    (lab,) = process_arc_aircraft(inst, "A", "i", "j", [AircraftLabel(5.0, 0, "i", 100)], [200], ZERO)
    assert lab.cost - 5.0 == pytest.approx(100.0)


@pytest.mark.parametrize("a,b,expected", [((5, 10), (6, 20), True), ((5, 20), (6, 10), False),
                                          ((5, 10), (5, 10), True)])
def test_aircraft_dominance(a, b, expected):
    assert dominate_aircraft(AircraftLabel(*a), AircraftLabel(*b)) is expected


# --- cargo -----------------------------------------------------------------------------


def test_cargo_on_time_original_is_not_improving():
    inst = network([Flight("f1", "X", "Y", 0, 60)], [Aircraft("A", "N", 10, "X", 0, ("f1",))],
                   [CargoOrder("o", "X", "Y", 5, 100, ("f1",))])
    assert price_cargo(inst, "o", ZERO, TimeRegistry(inst)) == []


def test_cargo_change_against_demand_dual():
    inst = network([Flight("f1", "X", "Y", 0, 60), Flight("f2", "X", "Y", 30, 60)],
                   [Aircraft("A", "N", 10, "X", 0, ("f1",)), Aircraft("B", "N", 10, "X", 0, ("f2",))],
                   [CargoOrder("o", "X", "Y", 5, 1000, ("f1",))])
    found = price_cargo(inst, "o", DualValues(theta={"o": 100.0}), TimeRegistry(inst))
    by_legs = {p.column.legs: p.reduced_cost for p in found}
    assert by_legs[(("f2", 30),)] == pytest.approx(-99.0)


def test_late_arrival_adds_delay_rate_per_uld():
    inst = network([Flight("f1", "X", "Y", 0, 60)], [Aircraft("A", "N", 10, "X", 0, ("f1",))],
                   [CargoOrder("o", "X", "Y", 5, 0, ("f1",))])
    lab = CargoLabel(0.0, 0, (), "f1", 0)
    assert sink_value(inst, "o", lab, ZERO) == pytest.approx(2.4)


def _toy_cargo_net():
    return network([Flight("i", "X", "Y", 0, 60), Flight("j", "Y", "Z", 100, 60)],
                   [Aircraft("A", "N", 10, "X", 0, ("i", "j"))],
                   [CargoOrder("o", "X", "Z", 5, 1000, ("i", "j"))], turn=80, trans=120)


def test_two_fresh_cargo_options():
    inst = _toy_cargo_net()
    opts = cargo_options(inst, "i", 0, "j", [], fixed=False)
    assert 140 in opts and 180 in opts
    assert inst.is_short("i", 0, "j", 140) and not inst.is_short("i", 0, "j", 180)


def test_grid_cargo_options():
    inst = _toy_cargo_net()
    assert cargo_options(inst, "i", 0, "j", [150], fixed=True) == [150]
    assert inst.is_short("i", 0, "j", 150)
    assert cargo_options(inst, "i", 0, "j", [130], fixed=True) == []


@pytest.mark.parametrize("a,b,expected", [
    ((5, 10, ()), (6, 20, (("a", 0, "b", 0),)), True),
    ((5, 10, (("a", 0, "b", 0),)), (6, 20, ()), False),
    ((5, 10, ()), (5, 10, ()), True),
])
def test_cargo_dominance(a, b, expected):
    assert dominate_cargo(CargoLabel(*a), CargoLabel(*b)) is expected


# --- labels against enumeration -----------------------------------------------------


def _random_duals(inst, reg, rng: random.Random) -> DualValues:
    copies = [(f, t) for f in inst.flight_order for t in reg.candidates(f)]
    return DualValues(
        alpha={f: rng.uniform(0, 2000) for f in inst.flight_order},
        beta={a: rng.uniform(-50, 0) for a in inst.aircraft},
        theta={o: rng.uniform(0, 80) for o in inst.cargo},
        gamma={c: rng.uniform(0, 5) for c in copies if rng.random() < 0.5},
        pi={(o, f, t): rng.uniform(-20, 0) for o in inst.cargo for f, t in copies if rng.random() < 0.2},
    )


def _small_instances():
    for seed in range(40):
        scn = micro_scenario(seed)
        inst = compile_scenario(scn)
        if len(inst.regular_flights()) <= 4:
            yield seed, inst


SMALL = list(_small_instances())


def test_there_are_small_networks_to_check():
    assert len(SMALL) >= 5


@pytest.mark.parametrize("seed,inst", SMALL, ids=[str(s) for s, _ in SMALL])
def test_labels_match_enumeration(seed, inst):
    rng = random.Random(seed)
    reg = TimeRegistry(inst, grid={f: inst.grid(f, 90, 30) for f in inst.flight_order})
    duals = _random_duals(inst, reg, rng)
    for a in inst.aircraft:
        enum = [string_label_cost(inst, a, legs, duals) for legs in enumerate_aircraft_strings(inst, a, reg)]
        best_enum = min([c for c in enum if c < -1e-9], default=None)
        found = price_aircraft(inst, a, duals, reg, k=1)
        best_label = found[0].reduced_cost if found else None
        assert (best_enum is None) == (best_label is None)
        if found:
            assert best_label == pytest.approx(best_enum, abs=1e-7)
        for labs in aircraft_frontiers(inst, a, duals, reg).values():
            _assert_antichain(labs, dominate_aircraft)
    for o in inst.cargo:
        enum = [itinerary_label_cost(inst, o, legs, duals) for legs in enumerate_cargo_itineraries(inst, o, reg)]
        best_enum = min([c for c in enum if c < -1e-9], default=None)
        found = price_cargo(inst, o, duals, reg, k=1)
        best_label = found[0].reduced_cost if found else None
        assert (best_enum is None) == (best_label is None)
        if found:
            assert best_label == pytest.approx(best_enum, abs=1e-7)
        for labs in cargo_frontiers(inst, o, duals, reg).values():
            _assert_antichain(labs, dominate_cargo)


def _assert_antichain(labels, dominates):
    for x in labels:
        for y in labels:
            if x is not y:
                assert not dominates(x, y)
