import pytest

from cargo_recovery.domain import (Aircraft, Airport, CargoAssignment, CargoOrder, Connection, ConnectionRule,
                                   CostParameters, DomainError, Flight, FlightCopy, IncompletePlan, RecoveryPlan,
                                   Scenario, Schedule, is_short_through, plan_cost, plan_policy, validate_schedule)


def two_leg_schedule(gap: int = 120, same_aircraft: bool = True) -> Schedule:
    airports = {c: Airport(c) for c in "XYZ"}
    f1 = Flight("f1", "X", "Y", 0, 100)
    f2 = Flight("f2", "Y", "Z", 100 + gap, 100)
    if same_aircraft:
        aircraft = {"A": Aircraft("A", "N", 10, "X", 0, ("f1", "f2"))}
    else:
        aircraft = {"A": Aircraft("A", "N", 10, "X", 0, ("f1",)), "B": Aircraft("B", "N", 10, "Y", 0, ("f2",))}
    cargo = {"o": CargoOrder("o", "X", "Z", 5, f2.sched_arr, ("f1", "f2"))}
    return Schedule(airports, aircraft, {"f1": f1, "f2": f2}, cargo)


def kinds(violations):
    return [v.kind for v in violations]


def test_consistent_schedule_is_clean():
    assert validate_schedule(two_leg_schedule()) == []


def test_itinerary_departing_before_arrival():
    s = two_leg_schedule(gap=-10, same_aircraft=False)
    assert kinds(validate_schedule(s)) == ["ChainBreak"]


def test_short_transshipment_between_aircraft():
    s = two_leg_schedule(gap=100, same_aircraft=False)
    assert kinds(validate_schedule(s)) == ["TransshipmentViolation"]


def test_turn_violation_on_own_rotation():
    s = two_leg_schedule(gap=50)
    assert "TurnViolation" in kinds(validate_schedule(s))


def _connection(gap: int, same: bool) -> Connection:
    return Connection(FlightCopy("f1", 0), FlightCopy("f2", 100 + gap), 100, same)


@pytest.mark.parametrize("gap,same,expected", [(80, True, True), (120, True, False), (80, False, False)])
def test_short_through(gap, same, expected):
    assert is_short_through(_connection(gap, same), ConnectionRule(trans_time=120)) is expected


def test_short_through_is_monotone_in_gap():
    rule = ConnectionRule()
    flags = [is_short_through(_connection(g, True), rule) for g in range(0, 300, 5)]
    assert flags == sorted(flags, reverse=True)


def undisturbed_plan(s: Schedule, shift: int = 0) -> RecoveryPlan:
    return RecoveryPlan(
        strings={"A": (("f1", 0), ("f2", s.flights["f2"].sched_dep + shift))},
        canceled_flights=(),
        shipments=(CargoAssignment("o", (("f1", 0), ("f2", s.flights["f2"].sched_dep + shift)), 5),),
        canceled_cargo={},
    )


def test_undisturbed_plan_costs_nothing():
    s = two_leg_schedule()
    cost = plan_cost(undisturbed_plan(s), Scenario(s))
    assert cost.total == 0.0
    assert all(v == 0.0 for v in cost.as_dict().values())


def test_delay_costs_at_default_rates():
    s = two_leg_schedule()
    plan = RecoveryPlan(
        strings={"A": (("f1", 0), ("f2", 220 + 30))},
        canceled_flights=(),
        shipments=(CargoAssignment("o", (("f1", 0), ("f2", 250)), 5),),
        canceled_cargo={},
    )
    # cargo due at the scheduled arrival, so it is 30 minutes late; shift the
    # due time to get exactly 60 minutes late as in the worked rates
    late_s = Schedule(s.airports, s.aircraft, s.flights,
                      {"o": CargoOrder("o", "X", "Z", 5, s.flights["f2"].sched_arr - 30, ("f1", "f2"))})
    cost = plan_cost(plan, Scenario(late_s))
    assert cost.flight_delay == pytest.approx(60.0)
    assert cost.cargo_delay == pytest.approx(12.0)
    assert cost.total == pytest.approx(72.0)
    policy = plan_policy(plan, Scenario(late_s))
    assert policy.flight_delay_minutes == 30
    assert policy.cargo_delay_uld_minutes == 300


def test_cancel_flight_and_cargo():
    s = two_leg_schedule()
    plan = RecoveryPlan({"A": (("f1", 0),)}, ("f2",), (), {"o": 5})
    cost = plan_cost(plan, Scenario(s))
    assert cost.flight_cancel == 1200.0
    assert cost.cargo_cancel == 300.0
    assert cost.total == 1500.0


def test_incomplete_plans_rejected():
    s = two_leg_schedule()
    with pytest.raises(IncompletePlan):
        plan_cost(RecoveryPlan({"A": (("f1", 0),)}, (), (), {"o": 5}), Scenario(s))
    with pytest.raises(IncompletePlan):
        plan_cost(RecoveryPlan({"A": (("f1", 0), ("f2", 220))}, (), (), {"o": 3}), Scenario(s))


def test_negative_costs_and_bad_horizon_rejected():
    with pytest.raises(DomainError):
        CostParameters(flight_cancel=-1)
    with pytest.raises(DomainError):
        Scenario(two_leg_schedule(), horizon=(10, 10))
