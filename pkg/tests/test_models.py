"""Arc model and string master on hand-checkable instances."""
import dataclasses

import pytest

from cargo_recovery.arc_model import build_copy_network, solve_arc
from cargo_recovery.domain import AOG, CargoOrder, Flight
from cargo_recovery.instance import compile_scenario
from cargo_recovery.master import (init_master, integrality_gap, make_itinerary, make_string, solve_master_lp,
                                   solve_master_mip)
from cargo_recovery.scenarios import (WORKED_EXAMPLE_GRID, GeneratorConfig, brute_force_oracle, generate_scenario,
                                      micro_scenario, MICRO_GRID)


@pytest.fixture
def calm():
    return generate_scenario(GeneratorConfig(n_disruptions=0, seed=7))


def with_cargo(scn, *orders):
    cargo = dict(scn.schedule.cargo)
    cargo.update({o.id: o for o in orders})
    return dataclasses.replace(scn, schedule=dataclasses.replace(scn.schedule, cargo=cargo))


# --- copy network ----------------------------------------------------------------


def test_grid_copy_counts(calm):
    inst = compile_scenario(calm)
    late_start = max(f.sched_dep for f in inst.flights.values())
    net = build_copy_network(dataclasses.replace(calm, horizon=(0, late_start + 2000)), 240, 5)
    assert {net.copies(f) for f in net.inst.flight_order} == {49}
    assert {build_copy_network(calm, 0, 5).copies(f) for f in inst.flight_order} == {1}


def test_closed_airport_removes_copies_but_not_ground_time(worked):
    airports = dict(worked.schedule.airports)
    airports["X"] = dataclasses.replace(airports["X"], closures=((0, 600),))
    closed = dataclasses.replace(worked, schedule=dataclasses.replace(worked.schedule, airports=airports),
                                 disruptions=(AOG("A", 0, 60, "X"),))
    net = build_copy_network(closed, *WORKED_EXAMPLE_GRID)
    assert net.copies("f1") == 0
    aog = [f for f in net.inst.flight_order if net.inst.flights[f].mandatory]
    assert [net.copies(f) for f in aog] == [1]
    res = solve_arc(closed, *WORKED_EXAMPLE_GRID)
    assert res.plan.canceled_flights == ("f1",)


def test_arc_model_calm_day_costs_nothing(calm):
    res = solve_arc(calm, 60, 30)
    assert res.objective == pytest.approx(0.0)
    original = {f: calm.schedule.flights[f].sched_dep for f in calm.schedule.flights}
    assert res.plan.flight_times() == original


def test_arc_model_worked(worked):
    assert solve_arc(worked, *WORKED_EXAMPLE_GRID).objective == pytest.approx(50.0)


@pytest.mark.parametrize("seed", range(5))
def test_arc_model_matches_enumeration(seed):
    scn = micro_scenario(seed)
    assert solve_arc(scn, *MICRO_GRID).objective == pytest.approx(brute_force_oracle(scn, *MICRO_GRID), abs=1e-6)


# --- string master -------------------------------------------------------------


def test_master_calm_day(calm):
    ms = init_master(compile_scenario(calm))
    sol, _ = solve_master_lp(ms)
    assert sol.objective == pytest.approx(0.0)
    mip = solve_master_mip(ms)
    assert mip.objective == pytest.approx(0.0)
    assert integrality_gap(sol.objective, mip.objective) == 0.0


def test_broken_itinerary_is_canceled_in_initial_master(worked):
    aog = dataclasses.replace(worked, disruptions=(AOG("B", 0, 600, "Y"),))
    ms = init_master(compile_scenario(aog))
    sol, _ = solve_master_lp(ms)
    assert sol.primal[("z", "o1")] == pytest.approx(5.0)


def _worked_master(inst, with_vi):
    ms = init_master(inst, with_vi=with_vi)
    ms.add_column(make_string(inst, "B", [("f2", 220)]))
    ms.add_column(make_itinerary(inst, "o1", [("f1", 0), ("f2", 220)]))
    return ms


def test_worked_example_master_bounds(worked):
    inst = compile_scenario(worked)
    assert solve_master_lp(_worked_master(inst, False))[0].objective == pytest.approx(50 / 3, abs=1e-6)
    ms = _worked_master(inst, True)
    lp = solve_master_lp(ms)[0].objective
    assert lp == pytest.approx(50.0, abs=1e-6)
    ip = solve_master_mip(ms).objective
    assert ip == pytest.approx(50.0)
    assert integrality_gap(lp, ip) == pytest.approx(0.0, abs=1e-9)


def test_row_generation_counts(worked):
    scn = with_cargo(worked, CargoOrder("o2", "X", "Y", 3, 1000, ("f1",)))
    inst = compile_scenario(scn)
    n_orders = len(inst.cargo)
    ms = init_master(inst, eager_vi=True)
    one_new = ms.add_column(make_itinerary(inst, "o2", [("f1", 25)]))
    assert (one_new.cap, one_new.vi, one_new.sc) == (1, n_orders, 0)
    registered_only = make_string(inst, "A", [("f1", 25)])
    assert registered_only.key not in ms.strings
    assert ms.add_column(registered_only).total == 0
    two_new = ms.add_column(make_itinerary(inst, "o1", [("f1", 50), ("f2", 245)]))
    assert (two_new.cap, two_new.vi, two_new.sc) == (2, 2 * n_orders, 1)


def test_added_column_reduced_cost_matches_objective_change(worked):
    inst = compile_scenario(worked)
    ms = init_master(inst, with_vi=False)
    ms.add_column(make_string(inst, "B", [("f2", 220)]))
    sol, _ = solve_master_lp(ms)
    col = make_itinerary(inst, "o1", [("f1", 0), ("f2", 220)])
    ms.add_column(col)
    assert ms.reduced_cost(col, sol.duals) < 0
    assert solve_master_lp(ms)[0].objective < sol.objective - 1e-9


def test_gap_formula():
    assert integrality_gap(40.0, 50.0) == pytest.approx(0.25)
    assert integrality_gap(0.0, 0.0) == 0.0
