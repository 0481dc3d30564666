"""Label-setting search for aircraft strings with negative reduced cost.

A label at flight ``j`` is the partial string ending with ``j`` departing at
``time``: its reduced cost so far and its delay. Flights are visited in their
chronological order, which makes the connection graph acyclic.
"""
from __future__ import annotations

from dataclasses import dataclass

from .instance import RecoveryInstance
from .master import DualValues, make_string
from .registry import TimeRegistry

NEGATIVE = -1e-9


@dataclass(frozen=True)
class AircraftLabel:
    cost: float
    delay: int
    flight: str = ""
    time: int = 0
    pred: "AircraftLabel | None" = None

    def legs(self) -> tuple[tuple[str, int], ...]:
        out = []
        node = self
        while node is not None:
            out.append((node.flight, node.time))
            node = node.pred
        return tuple(reversed(out))


@dataclass(frozen=True)
class Priced:
    column: object
    reduced_cost: float


def dominate_aircraft(l1: AircraftLabel, l2: AircraftLabel) -> bool:
    return round(l1.cost, 9) <= round(l2.cost, 9) and l1.delay <= l2.delay


def insert_label(frontier: list, label, dominates) -> bool:
    """Add ``label`` unless something already there dominates it; drop what it dominates."""
    for old in frontier:
        if dominates(old, label):
            return False
    frontier[:] = [old for old in frontier if not dominates(label, old)]
    frontier.append(label)
    return True


def departure_options(inst: RecoveryInstance, fid: str, candidates, bound: int, fixed: bool) -> list[int]:
    """Departures for ``fid`` no earlier than ``bound``.

    On a fixed grid the candidates are taken as they are; otherwise each is
    pushed up to the bound and past any airport closure.
    """
    out = set()
    for t in candidates:
        if fixed:
            if t >= bound and inst.copy_ok(fid, t):
                out.add(t)
        else:
            s = inst.earliest_departure(fid, max(t, bound))
            if s is not None:
                out.add(s)
    return sorted(out)


def leg_value(inst: RecoveryInstance, aircraft: str, fid: str, t: int, duals: DualValues) -> float:
    cap = inst.capacity(aircraft, fid)
    return (
        inst.leg_cost(aircraft, fid, t)
        - duals.a(fid)
        - cap * duals.g(fid, t)
        - duals.pi_other_times(fid, t)
    )


def _candidates(inst: RecoveryInstance, registry: TimeRegistry, fid: str):
    ts = registry.candidates(fid)
    t0 = inst.flights[fid].sched_dep
    if registry.strict or t0 in ts:
        return ts
    return sorted(set(ts) | {t0})


def _successors(inst: RecoveryInstance, aircraft: str) -> dict[str, list[str]]:
    flights = [f for f in inst.flight_order if inst.allowed(aircraft, f)]
    by_origin: dict[str, list[str]] = {}
    for f in flights:
        by_origin.setdefault(inst.flights[f].origin, []).append(f)
    return {f: [g for g in by_origin.get(inst.flights[f].destination, []) if inst.can_follow(f, g)] for f in flights}


def process_arc_aircraft(inst: RecoveryInstance, aircraft: str, i: str, j: str, labels_i, candidates_j,
                         duals: DualValues, fixed: bool = False) -> list[AircraftLabel]:
    """Extend every label at ``i`` along the connection to ``j``, once per departure option."""
    fi, fj = inst.flights[i], inst.flights[j]
    cap_a = inst.aircraft[aircraft].capacity
    out = []
    for lab in labels_i:
        bound = lab.time + fi.fly_time + inst.turn(i, j)
        for t in departure_options(inst, j, candidates_j, bound, fixed):
            cost = lab.cost + leg_value(inst, aircraft, j, t, duals)
            if inst.is_short(i, lab.time, j, t):
                cost -= cap_a * duals.e(i, lab.time, j, t)
            out.append(AircraftLabel(cost, t - fj.sched_dep, j, t, lab))
    return out


def _source_labels(inst, aircraft, registry, duals, fixed):
    a = inst.aircraft[aircraft]
    out = {}
    for f in inst.flight_order:
        if not inst.allowed(aircraft, f) or inst.flights[f].origin != a.airport:
            continue
        labs = []
        for t in departure_options(inst, f, _candidates(inst, registry, f), a.ready, fixed):
            labs.append(AircraftLabel(leg_value(inst, aircraft, f, t, duals), t - inst.flights[f].sched_dep, f, t))
        if labs:
            out[f] = labs
    return out


def aircraft_frontiers(inst: RecoveryInstance, aircraft: str, duals: DualValues, registry: TimeRegistry,
                       fixed: bool | None = None) -> dict[str, list[AircraftLabel]]:
    """Non-dominated labels at every flight after one forward pass."""
    fixed = registry.frozen if fixed is None else fixed
    succ = _successors(inst, aircraft)
    frontier: dict[str, list[AircraftLabel]] = {f: [] for f in succ}
    for f, labs in _source_labels(inst, aircraft, registry, duals, fixed).items():
        for lab in labs:
            insert_label(frontier[f], lab, dominate_aircraft)
    for i in inst.flight_order:
        if i not in succ or not frontier[i]:
            continue
        for j in succ[i]:
            new = process_arc_aircraft(inst, aircraft, i, j, frontier[i], _candidates(inst, registry, j), duals, fixed)
            for lab in new:
                insert_label(frontier[j], lab, dominate_aircraft)
    return frontier


def price_aircraft(inst: RecoveryInstance, aircraft: str, duals: DualValues, registry: TimeRegistry,
                   k: int = 10, fixed: bool | None = None) -> list[Priced]:
    """Up to ``k`` strings with the most negative reduced cost, best first."""
    frontier = aircraft_frontiers(inst, aircraft, duals, registry, fixed)
    beta = duals.b(aircraft)
    found = {}
    for labs in frontier.values():
        for lab in labs:
            rc = lab.cost - beta
            if rc < NEGATIVE:
                legs = lab.legs()
                if legs not in found or rc < found[legs]:
                    found[legs] = rc
    best = sorted(found.items(), key=lambda kv: (kv[1], kv[0]))[:k]
    return [Priced(make_string(inst, aircraft, legs), rc) for legs, rc in best]


def enumerate_aircraft_strings(inst: RecoveryInstance, aircraft: str, registry: TimeRegistry,
                               fixed: bool | None = None, limit: int = 200_000) -> list[tuple]:
    """Every string the label search could build, without dominance."""
    fixed = registry.frozen if fixed is None else fixed
    succ = _successors(inst, aircraft)
    a = inst.aircraft[aircraft]
    out = []

    def walk(legs):
        out.append(tuple(legs))
        if len(out) > limit:
            raise OverflowError("too many strings to enumerate")
        i, ti = legs[-1]
        bound_base = ti + inst.flights[i].fly_time
        for j in succ[i]:
            for t in departure_options(inst, j, _candidates(inst, registry, j), bound_base + inst.turn(i, j), fixed):
                legs.append((j, t))
                walk(legs)
                legs.pop()

    for f in inst.flight_order:
        if f in succ and inst.flights[f].origin == a.airport:
            for t in departure_options(inst, f, _candidates(inst, registry, f), a.ready, fixed):
                walk([(f, t)])
    return out


def string_label_cost(inst: RecoveryInstance, aircraft: str, legs, duals: DualValues) -> float:
    """Reduced cost of a string assembled term by term, as the labels accumulate it."""
    cap_a = inst.aircraft[aircraft].capacity
    total = -duals.b(aircraft)
    for n, (f, t) in enumerate(legs):
        total += leg_value(inst, aircraft, f, t, duals)
        if n:
            g, s = legs[n - 1]
            if inst.is_short(g, s, f, t):
                total -= cap_a * duals.e(g, s, f, t)
    return total

