"""Schedules, disruptions, connection rules and the recovery cost schedule.

Times are integer minutes. Hourly rates are kept as published and converted
by ``rate * minutes / 60`` so that cents stay exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

DEFAULT_TURN = 80
DEFAULT_TRANS = 120
DEFAULT_MAX_DELAY = 240


class DomainError(Exception):
    pass


class IncompletePlan(DomainError):
    pass


@dataclass(frozen=True)
class Airport:
    code: str
    closures: tuple[tuple[int, int], ...] = ()
    hub: bool = False

    def closed_at(self, minute: int) -> bool:
        return any(start <= minute < end for start, end in self.closures)


@dataclass(frozen=True)
class Aircraft:
    id: str
    fleet: str
    capacity: int
    available_airport: str
    available_minute: int
    original_string: tuple[str, ...] = ()


@dataclass(frozen=True)
class Flight:
    id: str
    origin: str
    destination: str
    sched_dep: int
    fly_time: int
    max_delay: int = DEFAULT_MAX_DELAY
    cancel_cost: float | None = None

    @property
    def sched_arr(self) -> int:
        return self.sched_dep + self.fly_time


@dataclass(frozen=True)
class CargoOrder:
    id: str
    origin: str
    destination: str
    volume: int
    due_time: int
    original_itinerary: tuple[str, ...]
    cancel_cost_per_uld: float | None = None


@dataclass(frozen=True)
class CostParameters:
    flight_cancel: float = 1200.0
    aircraft_swap: float = 40.0
    flight_delay_per_hour: float = 120.0
    cargo_cancel_per_uld: float = 60.0
    cargo_flight_change_per_uld: float = 1.0
    cargo_delay_per_uld_hour: float = 2.4

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise DomainError(f"cost parameter {name} is negative")

    def flight_delay(self, minutes: int) -> float:
        return self.flight_delay_per_hour * minutes / 60.0

    def cargo_delay(self, minutes: int) -> float:
        return self.cargo_delay_per_uld_hour * max(minutes, 0) / 60.0


@dataclass(frozen=True)
class ConnectionRule:
    """Minimum turn time looked up by the fleet flying the earlier flight."""

    turn_by_fleet: Mapping[str, int] = field(default_factory=dict)
    default_turn: int = DEFAULT_TURN
    trans_time: int = DEFAULT_TRANS

    def turn_for_fleet(self, fleet: str | None) -> int:
        return int(self.turn_by_fleet.get(fleet, self.default_turn)) if fleet else self.default_turn


@dataclass(frozen=True)
class Schedule:
    airports: Mapping[str, Airport]
    aircraft: Mapping[str, Aircraft]
    flights: Mapping[str, Flight]
    cargo: Mapping[str, CargoOrder]
    rules: ConnectionRule = field(default_factory=ConnectionRule)

    def original_aircraft(self) -> dict[str, str]:
        owner = {}
        for a in self.aircraft.values():
            for f in a.original_string:
                owner[f] = a.id
        return owner

    def turn_time(self, prev_id: str, next_id: str) -> int:
        owner = self.original_aircraft().get(prev_id)
        fleet = self.aircraft[owner].fleet if owner else None
        return self.rules.turn_for_fleet(fleet)


# --- disruptions -----------------------------------------------------------


@dataclass(frozen=True)
class AOG:
    aircraft: str
    start: int
    end: int
    airport: str | None = None


@dataclass(frozen=True)
class AirportClosure:
    airport: str
    start: int
    end: int


@dataclass(frozen=True)
class Mismatch:
    aircraft: str
    airport: str


@dataclass(frozen=True)
class CapacityShortage:
    flight: str
    delta: int


@dataclass(frozen=True)
class FlightOverlap:
    """The aircraft becomes ready ``delay`` minutes later than planned."""

    aircraft: str
    delay: int


Disruption = Union[AOG, AirportClosure, Mismatch, CapacityShortage, FlightOverlap]


@dataclass(frozen=True)
class Scenario:
    schedule: Schedule
    disruptions: tuple = ()
    horizon: tuple[int, int] = (0, 24 * 60)
    costs: CostParameters = field(default_factory=CostParameters)
    name: str = "scenario"

    def __post_init__(self):
        if not self.horizon[0] < self.horizon[1]:
            raise DomainError("horizon start must precede its end")


# --- connections -------------------------------------------------------------


@dataclass(frozen=True)
class FlightCopy:
    flight: str
    dep: int


@dataclass(frozen=True)
class Connection:
    prev: FlightCopy
    next: FlightCopy
    prev_arrival: int
    same_aircraft: bool


def is_short_through(c: Connection, rule: ConnectionRule) -> bool:
    return c.same_aircraft and (c.next.dep - c.prev_arrival) < rule.trans_time


# --- schedule validation -------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str


def validate_schedule(s: Schedule) -> list[Violation]:
    """Check the original plan: aircraft rotations and cargo itineraries."""
    out: list[Violation] = []
    owner = s.original_aircraft()
    for a in sorted(s.aircraft.values(), key=lambda a: a.id):
        if a.capacity < 1:
            out.append(Violation("Capacity", a.id, "capacity below one ULD"))
        where, ready = a.available_airport, a.available_minute
        prev = None
        for fid in a.original_string:
            f = s.flights.get(fid)
            if f is None:
                out.append(Violation("UnknownFlight", a.id, fid))
                break
            if f.origin != where:
                out.append(Violation("ChainBreak", a.id, f"{fid} departs {f.origin}, aircraft is at {where}"))
            need = ready if prev is None else ready + s.turn_time(prev, fid)
            if f.sched_dep < need:
                kind = "ChainBreak" if prev is None or f.sched_dep < ready else "TurnViolation"
                out.append(Violation(kind, a.id, f"{fid} departs {f.sched_dep}, ready {need}"))
            where, ready, prev = f.destination, f.sched_arr, fid
    for o in sorted(s.cargo.values(), key=lambda o: o.id):
        if o.volume < 1:
            out.append(Violation("Volume", o.id, "volume below one ULD"))
        legs = [s.flights.get(fid) for fid in o.original_itinerary]
        if not legs or any(f is None for f in legs):
            out.append(Violation("UnknownFlight", o.id, "empty or unknown itinerary"))
            continue
        if legs[0].origin != o.origin or legs[-1].destination != o.destination:
            out.append(Violation("EndpointMismatch", o.id, "itinerary endpoints differ from the order"))
        for f, g in zip(legs, legs[1:]):
            if f.destination != g.origin:
                out.append(Violation("ChainBreak", o.id, f"{f.id} arrives {f.destination}, {g.id} departs {g.origin}"))
                continue
            gap = g.sched_dep - f.sched_arr
            same = owner.get(f.id) is not None and owner.get(f.id) == owner.get(g.id)
            if gap < 0:
                out.append(Violation("ChainBreak", o.id, f"{g.id} departs before {f.id} arrives"))
            elif same and gap < s.turn_time(f.id, g.id):
                out.append(Violation("TurnViolation", o.id, f"{f.id}->{g.id} gap {gap}"))
            elif not same and gap < s.rules.trans_time:
                out.append(Violation("TransshipmentViolation", o.id, f"{f.id}->{g.id} gap {gap} below {s.rules.trans_time}"))
    return out


# --- recovery plans and their cost -------------------------------------------


@dataclass(frozen=True)
class CargoAssignment:
    cargo: str
    legs: tuple[tuple[str, int], ...]
    volume: int


@dataclass(frozen=True)
class RecoveryPlan:
    strings: Mapping[str, tuple[tuple[str, int], ...]]
    canceled_flights: tuple[str, ...]
    shipments: tuple[CargoAssignment, ...]
    canceled_cargo: Mapping[str, int]

    def flight_times(self) -> dict[str, int]:
        return {f: t for legs in self.strings.values() for f, t in legs}


@dataclass(frozen=True)
class CostBreakdown:
    flight_cancel: float = 0.0
    aircraft_swap: float = 0.0
    flight_delay: float = 0.0
    cargo_cancel: float = 0.0
    flight_change: float = 0.0
    cargo_delay: float = 0.0

    @property
    def total(self) -> float:
        return (
            self.flight_cancel + self.aircraft_swap + self.flight_delay
            + self.cargo_cancel + self.flight_change + self.cargo_delay
        )

    def as_dict(self) -> dict[str, float]:
        parts = {k: round(v, 2) for k, v in self.__dict__.items()}
        parts["total"] = round(self.total, 2)
        return parts


@dataclass(frozen=True)
class PolicyCounts:
    flight_cancel: int = 0
    aircraft_swap: int = 0
    flight_delay_minutes: int = 0
    cargo_cancel_ulds: int = 0
    flight_change_ulds: int = 0
    cargo_delay_uld_minutes: int = 0


def plan_cost(plan: RecoveryPlan, scn: Scenario) -> CostBreakdown:
    """Re-cost a plan from the scenario data alone (no solver state involved)."""
    counts, money = _plan_accounting(plan, scn)
    return money


def plan_policy(plan: RecoveryPlan, scn: Scenario) -> PolicyCounts:
    return _plan_accounting(plan, scn)[0]


def _plan_accounting(plan: RecoveryPlan, scn: Scenario):
    from .instance import compile_scenario

    inst = compile_scenario(scn)
    costs = scn.costs
    flown: dict[str, tuple[str, int]] = {}
    for a, legs in plan.strings.items():
        for f, t in legs:
            if f in flown:
                raise IncompletePlan(f"flight {f} flown twice")
            flown[f] = (a, t)
    canceled = set(plan.canceled_flights)
    for fid in inst.flights:
        if (fid in flown) == (fid in canceled):
            raise IncompletePlan(f"flight {fid} must be either flown or canceled")
    n_cancel = n_swap = delay_min = 0
    fc = swap = fd = 0.0
    for fid in sorted(canceled):
        if inst.flights[fid].mandatory:
            raise IncompletePlan(f"mandatory flight {fid} canceled")
        n_cancel += 1
        fc += inst.cancel_cost(fid)
    for fid, (a, t) in sorted(flown.items()):
        f = inst.flights[fid]
        if inst.swapped(a, fid):
            n_swap += 1
            swap += costs.aircraft_swap
        delay_min += t - f.sched_dep
        fd += costs.flight_delay(t - f.sched_dep)
    shipped: dict[str, int] = {}
    n_change = delay_uld_min = 0
    change = cd = 0.0
    for s in plan.shipments:
        o = inst.cargo[s.cargo]
        shipped[s.cargo] = shipped.get(s.cargo, 0) + s.volume
        for f, t in s.legs:
            if flown.get(f, (None, None))[1] != t:
                raise IncompletePlan(f"cargo {s.cargo} uses {f}@{t}, which is not flown")
            if f not in o.original_itinerary:
                n_change += s.volume
                change += s.volume * costs.cargo_flight_change_per_uld
        f_last, t_last = s.legs[-1]
        late = t_last + inst.flights[f_last].fly_time - o.due_time
        if late > 0:
            delay_uld_min += late * s.volume
            cd += s.volume * costs.cargo_delay(late)
    n_cc = 0
    cc = 0.0
    for oid, o in sorted(inst.cargo.items()):
        dropped = plan.canceled_cargo.get(oid, 0)
        if shipped.get(oid, 0) + dropped != o.volume:
            raise IncompletePlan(f"cargo {oid}: shipped plus canceled differs from volume")
        n_cc += dropped
        cc += dropped * inst.cargo_cancel_cost(oid)
    counts = PolicyCounts(n_cancel, n_swap, delay_min, n_cc, n_change, delay_uld_min)
    money = CostBreakdown(fc, swap, fd, cc, change, cd)
    return counts, money
