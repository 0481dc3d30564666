"""A scenario with its disruptions applied, in the form the solvers consume.

Every model (arc network, string master, pricing, brute-force oracle) asks
this object the same questions: which departure times a flight may take, which
connections are legal, and what each decision costs.
"""
from __future__ import annotations

from dataclasses import dataclass

from .domain import (
    AOG,
    AirportClosure,
    CapacityShortage,
    CargoOrder,
    FlightOverlap,
    Mismatch,
    RecoveryPlan,
    Scenario,
)

# cost used for the slack column of a mandatory (AOG) flight in the string master
MANDATORY_PENALTY = 1e6


@dataclass(frozen=True)
class RFlight:
    id: str
    origin: str
    destination: str
    sched_dep: int
    fly_time: int
    max_delay: int
    cancel_cost: float
    order: int
    mandatory: bool = False
    aog_aircraft: str | None = None

    @property
    def sched_arr(self) -> int:
        return self.sched_dep + self.fly_time


@dataclass(frozen=True)
class RAircraft:
    id: str
    fleet: str
    capacity: int
    airport: str
    ready: int


class RecoveryInstance:
    def __init__(self, scn: Scenario):
        sched = scn.schedule
        self.scenario = scn
        self.costs = scn.costs
        self.trans_time = sched.rules.trans_time
        owner = sched.original_aircraft()
        closures = {code: list(ap.closures) for code, ap in sched.airports.items()}
        shortage: dict[str, int] = {}
        airport = {a.id: a.available_airport for a in sched.aircraft.values()}
        ready = {a.id: a.available_minute for a in sched.aircraft.values()}
        aogs = []
        for d in scn.disruptions:
            if isinstance(d, AirportClosure):
                closures.setdefault(d.airport, []).append((d.start, d.end))
            elif isinstance(d, CapacityShortage):
                shortage[d.flight] = shortage.get(d.flight, 0) + d.delta
            elif isinstance(d, Mismatch):
                airport[d.aircraft] = d.airport
            elif isinstance(d, FlightOverlap):
                ready[d.aircraft] += d.delay
            elif isinstance(d, AOG):
                aogs.append(d)
            else:
                raise TypeError(f"unknown disruption {d!r}")
        self.closures = {k: tuple(sorted(v)) for k, v in closures.items()}
        self.shortage = shortage
        self.aircraft = {
            a.id: RAircraft(a.id, a.fleet, a.capacity, airport[a.id], ready[a.id])
            for a in sorted(sched.aircraft.values(), key=lambda a: a.id)
        }
        raw = []
        for f in sched.flights.values():
            cancel = self.costs.flight_cancel if f.cancel_cost is None else f.cancel_cost
            raw.append((f.id, f.origin, f.destination, f.sched_dep, f.fly_time, f.max_delay, cancel, False, None))
        for d in aogs:
            where = d.airport or self._location_at(sched, d.aircraft, d.start)
            raw.append((f"AOG-{d.aircraft}", where, where, d.start, d.end - d.start, 0, MANDATORY_PENALTY, True, d.aircraft))
            owner[f"AOG-{d.aircraft}"] = d.aircraft
        raw.sort(key=lambda r: (r[3], r[0]))
        self.flights = {r[0]: RFlight(*r[:7], order=k, mandatory=r[7], aog_aircraft=r[8]) for k, r in enumerate(raw)}
        self.flight_order = [r[0] for r in raw]
        self.owner = owner
        self.cargo: dict[str, CargoOrder] = dict(sorted(sched.cargo.items()))
        fleet_of = {a.id: a.fleet for a in sched.aircraft.values()}
        self._turn_after = {
            fid: sched.rules.turn_for_fleet(fleet_of.get(owner.get(fid))) for fid in self.flights
        }
        self.cargo_ready = {
            o.id: min(sched.flights[f].sched_dep for f in o.original_itinerary[:1]) if o.original_itinerary else 0
            for o in self.cargo.values()
        }

    @staticmethod
    def _location_at(sched, aircraft_id: str, minute: int) -> str:
        a = sched.aircraft[aircraft_id]
        where = a.available_airport
        for fid in a.original_string:
            f = sched.flights[fid]
            if f.sched_arr <= minute:
                where = f.destination
        return where

    # --- flights and times ---------------------------------------------------

    def airport_open(self, code: str, minute: int) -> bool:
        return not any(s <= minute < e for s, e in self.closures.get(code, ()))

    def copy_ok(self, fid: str, t: int) -> bool:
        f = self.flights[fid]
        if f.mandatory:
            return t == f.sched_dep
        if not 0 <= t - f.sched_dep <= f.max_delay:
            return False
        return self.airport_open(f.origin, t) and self.airport_open(f.destination, t + f.fly_time)

    def earliest_departure(self, fid: str, t: int) -> int | None:
        """First minute >= t at which the flight can depart and land, within its delay limit."""
        f = self.flights[fid]
        if f.mandatory:
            return f.sched_dep if t <= f.sched_dep else None
        t = max(t, f.sched_dep)
        while t - f.sched_dep <= f.max_delay:
            moved = False
            for s, e in self.closures.get(f.origin, ()):
                if s <= t < e:
                    t, moved = e, True
            for s, e in self.closures.get(f.destination, ()):
                if s <= t + f.fly_time < e:
                    t, moved = e - f.fly_time, True
            if not moved:
                return t
        return None

    def grid(self, fid: str, max_delay: int, interval: int) -> list[int]:
        f = self.flights[fid]
        if f.mandatory:
            return [f.sched_dep] if self.copy_ok(fid, f.sched_dep) else []
        if interval <= 0:
            steps = [0]
        else:
            steps = range(0, max_delay + 1, interval)
        return [f.sched_dep + k for k in steps if k <= f.max_delay and self.copy_ok(fid, f.sched_dep + k)]

    def arrival(self, fid: str, t: int) -> int:
        return t + self.flights[fid].fly_time

    def turn(self, prev: str, nxt: str) -> int:
        return self._turn_after[prev]

    def can_follow(self, prev: str, nxt: str) -> bool:
        """Static part of a connection: airports chain and the original order is kept."""
        f, g = self.flights[prev], self.flights[nxt]
        return f.destination == g.origin and f.order < g.order

    def can_connect(self, prev: str, t_prev: int, nxt: str, t_next: int) -> bool:
        return self.can_follow(prev, nxt) and t_next >= t_prev + self.flights[prev].fly_time + self._turn_after[prev]

    def is_short(self, prev: str, t_prev: int, nxt: str, t_next: int) -> bool:
        return t_next - (t_prev + self.flights[prev].fly_time) < self.trans_time

    # --- aircraft --------------------------------------------------------------

    def allowed(self, aircraft: str, fid: str) -> bool:
        f = self.flights[fid]
        return f.aog_aircraft is None or f.aog_aircraft == aircraft

    def starts_at(self, aircraft: str, fid: str, t: int) -> bool:
        a = self.aircraft[aircraft]
        return self.flights[fid].origin == a.airport and t >= a.ready

    def capacity(self, aircraft: str, fid: str) -> int:
        if self.flights[fid].mandatory:
            return 0
        return max(self.aircraft[aircraft].capacity - self.shortage.get(fid, 0), 0)

    def swapped(self, aircraft: str, fid: str) -> bool:
        own = self.owner.get(fid)
        return own is not None and own != aircraft

    def leg_cost(self, aircraft: str, fid: str, t: int) -> float:
        swap = self.costs.aircraft_swap if self.swapped(aircraft, fid) else 0.0
        return swap + self.costs.flight_delay(t - self.flights[fid].sched_dep)

    def cancel_cost(self, fid: str) -> float:
        return self.flights[fid].cancel_cost

    # --- cargo -----------------------------------------------------------------

    def cargo_source_ok(self, oid: str, fid: str) -> bool:
        f, o = self.flights[fid], self.cargo[oid]
        return not f.mandatory and f.origin == o.origin and f.sched_dep >= self.cargo_ready[oid]

    def cargo_extends(self, oid: str, fid: str) -> bool:
        return self.flights[fid].destination != self.cargo[oid].destination

    def cargo_sink_ok(self, oid: str, fid: str) -> bool:
        return self.flights[fid].destination == self.cargo[oid].destination

    def change_cost(self, oid: str, fid: str) -> float:
        if fid in self.cargo[oid].original_itinerary:
            return 0.0
        return self.costs.cargo_flight_change_per_uld

    def cargo_delay_cost(self, oid: str, arrival: int) -> float:
        return self.costs.cargo_delay(arrival - self.cargo[oid].due_time)

    def cargo_cancel_cost(self, oid: str) -> float:
        o = self.cargo[oid]
        return self.costs.cargo_cancel_per_uld if o.cancel_cost_per_uld is None else o.cancel_cost_per_uld

    def itinerary_unit_cost(self, oid: str, legs) -> float:
        change = sum(self.change_cost(oid, f) for f, _ in legs)
        f_last, t_last = legs[-1]
        return change + self.cargo_delay_cost(oid, self.arrival(f_last, t_last))

    def string_cost(self, aircraft: str, legs) -> float:
        return sum(self.leg_cost(aircraft, f, t) for f, t in legs)

    # --- helpers ---------------------------------------------------------------

    def regular_flights(self) -> list[str]:
        return [f for f in self.flight_order if not self.flights[f].mandatory]

    def original_short_connections(self) -> set[tuple[str, str]]:
        """Consecutive pairs of an original rotation whose scheduled gap is below the transshipment time."""
        pairs = set()
        for a in self.scenario.schedule.aircraft.values():
            for f, g in zip(a.original_string, a.original_string[1:]):
                ff, gg = self.flights[f], self.flights[g]
                if gg.sched_dep - ff.sched_arr < self.trans_time:
                    pairs.add((f, g))
        return pairs


def compile_scenario(scn: Scenario) -> RecoveryInstance:
    return RecoveryInstance(scn)


def check_plan(plan: RecoveryPlan, inst: RecoveryInstance) -> list[str]:
    """List every way ``plan`` breaks the recovery rules; empty means feasible."""
    problems: list[str] = []
    where: dict[tuple[str, int], str] = {}
    for a, legs in sorted(plan.strings.items()):
        prev = None
        for f, t in legs:
            if not inst.allowed(a, f):
                problems.append(f"{a} may not fly {f}")
            if not inst.copy_ok(f, t):
                problems.append(f"{f}@{t} infeasible time")
            if prev is None:
                if not inst.starts_at(a, f, t):
                    problems.append(f"{a} cannot start with {f}@{t}")
            elif not inst.can_connect(prev[0], prev[1], f, t):
                problems.append(f"{a}: {prev[0]}@{prev[1]} -> {f}@{t} not a legal connection")
            where[(f, t)] = a
            prev = (f, t)
    for f in inst.flights:
        if inst.flights[f].mandatory and f in plan.canceled_flights:
            problems.append(f"mandatory {f} canceled")
    next_leg = {}
    for a, legs in plan.strings.items():
        for x, y in zip(legs, legs[1:]):
            next_leg[x] = y
    load: dict[tuple[str, int], int] = {}
    for s in plan.shipments:
        legs = s.legs
        if not inst.cargo_source_ok(s.cargo, legs[0][0]):
            problems.append(f"{s.cargo} cannot start with {legs[0][0]}")
        if not inst.cargo_sink_ok(s.cargo, legs[-1][0]):
            problems.append(f"{s.cargo} does not end at its destination")
        for x, y in zip(legs, legs[1:]):
            if not inst.cargo_extends(s.cargo, x[0]):
                problems.append(f"{s.cargo} passes through its destination")
            if not inst.can_connect(x[0], x[1], y[0], y[1]):
                problems.append(f"{s.cargo}: {x}->{y} not a legal connection")
            elif inst.is_short(x[0], x[1], y[0], y[1]) and next_leg.get(x) != y:
                problems.append(f"{s.cargo}: short connection {x}->{y} without a through aircraft")
        for leg in legs:
            if leg not in where:
                problems.append(f"{s.cargo} uses unflown {leg}")
            load[leg] = load.get(leg, 0) + s.volume
    for leg, v in load.items():
        if leg in where and v > inst.capacity(where[leg], leg[0]):
            problems.append(f"{leg} overloaded: {v} > {inst.capacity(where[leg], leg[0])}")
    return problems
