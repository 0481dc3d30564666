"""Label-setting search for cargo itineraries with negative reduced cost.

Cargo labels also carry the short connections used so far. When a leg is
extended, two fresh departure options are offered besides the registered
times: the earliest one the aircraft turn allows (a short connection if the
same aircraft flies on) and the earliest one a normal transshipment allows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .aircraft_pricing import NEGATIVE, Priced, _candidates, insert_label
from .instance import RecoveryInstance
from .master import DualValues, make_itinerary
from .registry import TimeRegistry

ShortFilter = Callable[[str, str], bool]


def _always(i: str, j: str) -> bool:
    return True


@dataclass(frozen=True)
class CargoLabel:
    cost: float
    delay: int
    sc: tuple = ()
    flight: str = ""
    time: int = 0
    pred: "CargoLabel | None" = None

    def legs(self) -> tuple[tuple[str, int], ...]:
        out = []
        node = self
        while node is not None:
            out.append((node.flight, node.time))
            node = node.pred
        return tuple(reversed(out))


def dominate_cargo(l1: CargoLabel, l2: CargoLabel) -> bool:
    return (
        round(l1.cost, 9) <= round(l2.cost, 9)
        and l1.delay <= l2.delay
        and set(l1.sc) <= set(l2.sc)
    )


def cargo_options(inst: RecoveryInstance, i: str, t_i: int, j: str, candidates, fixed: bool,
                  allow_short: bool = True) -> list[int]:
    """Departures of ``j`` a cargo arriving on ``i@t_i`` can connect to.

    Registered times below the turn bound are rejected, not pushed. When short
    connections are not allowed on ``(i, j)`` the floor is the transshipment
    bound instead.
    """
    arrival = t_i + inst.flights[i].fly_time
    turn_bound = arrival + inst.turn(i, j)
    trans_bound = arrival + inst.trans_time
    floor = turn_bound if allow_short else max(turn_bound, trans_bound)
    if fixed:
        return sorted(t for t in set(candidates) if t >= floor and inst.copy_ok(j, t))
    t0 = inst.flights[j].sched_dep
    raw = set(candidates) | {max(trans_bound, t0)}
    if allow_short:
        raw.add(max(turn_bound, t0))
    out = set()
    for t in raw:
        if t < floor:
            continue
        s = inst.earliest_departure(j, t)
        if s is not None:
            out.add(s)
    return sorted(out)


def first_options(inst: RecoveryInstance, fid: str, candidates, fixed: bool) -> list[int]:
    if fixed:
        return sorted(t for t in set(candidates) if inst.copy_ok(fid, t))
    out = {inst.earliest_departure(fid, t) for t in candidates}
    out.discard(None)
    return sorted(out)


def cargo_leg_value(inst: RecoveryInstance, oid: str, fid: str, t: int, duals: DualValues) -> float:
    d = inst.cargo[oid].volume
    return inst.change_cost(oid, fid) + duals.g(fid, t) - duals.p(oid, fid, t) / d


def _successors(inst: RecoveryInstance, oid: str) -> dict[str, list[str]]:
    flights = inst.regular_flights()
    by_origin: dict[str, list[str]] = {}
    for f in flights:
        by_origin.setdefault(inst.flights[f].origin, []).append(f)
    out = {}
    for f in flights:
        if inst.cargo_extends(oid, f):
            out[f] = [g for g in by_origin.get(inst.flights[f].destination, []) if inst.can_follow(f, g)]
        else:
            out[f] = []
    return out


def process_arc_cargo(inst: RecoveryInstance, oid: str, i: str, j: str, labels_i, candidates_j,
                      duals: DualValues, fixed: bool = False, allow_short: bool = True) -> list[CargoLabel]:
    out = []
    t0 = inst.flights[j].sched_dep
    for lab in labels_i:
        for t in cargo_options(inst, i, lab.time, j, candidates_j, fixed, allow_short):
            cost = lab.cost + cargo_leg_value(inst, oid, j, t, duals)
            sc = lab.sc
            if inst.is_short(i, lab.time, j, t):
                cost += duals.e(i, lab.time, j, t)
                sc = tuple(sorted(sc + ((i, lab.time, j, t),)))
            out.append(CargoLabel(cost, t - t0, sc, j, t, lab))
    return out


def cargo_frontiers(inst: RecoveryInstance, oid: str, duals: DualValues, registry: TimeRegistry,
                    fixed: bool | None = None, allow_short: ShortFilter = _always) -> dict[str, list[CargoLabel]]:
    fixed = registry.frozen if fixed is None else fixed
    succ = _successors(inst, oid)
    frontier: dict[str, list[CargoLabel]] = {f: [] for f in succ}
    for f in succ:
        if not inst.cargo_source_ok(oid, f):
            continue
        for t in first_options(inst, f, _candidates(inst, registry, f), fixed):
            lab = CargoLabel(cargo_leg_value(inst, oid, f, t, duals), t - inst.flights[f].sched_dep, (), f, t)
            insert_label(frontier[f], lab, dominate_cargo)
    for i in inst.flight_order:
        if i not in succ or not frontier[i]:
            continue
        for j in succ[i]:
            new = process_arc_cargo(inst, oid, i, j, frontier[i], _candidates(inst, registry, j), duals,
                                    fixed, allow_short(i, j))
            for lab in new:
                insert_label(frontier[j], lab, dominate_cargo)
    return frontier


def sink_value(inst: RecoveryInstance, oid: str, lab: CargoLabel, duals: DualValues) -> float:
    arrival = inst.arrival(lab.flight, lab.time)
    return lab.cost + inst.cargo_delay_cost(oid, arrival) - duals.th(oid)


def price_cargo(inst: RecoveryInstance, oid: str, duals: DualValues, registry: TimeRegistry, k: int = 10,
                fixed: bool | None = None, allow_short: ShortFilter = _always) -> list[Priced]:
    frontier = cargo_frontiers(inst, oid, duals, registry, fixed, allow_short)
    found = {}
    for f, labs in frontier.items():
        if not inst.cargo_sink_ok(oid, f):
            continue
        for lab in labs:
            rc = sink_value(inst, oid, lab, duals)
            if rc < NEGATIVE:
                legs = lab.legs()
                if legs not in found or rc < found[legs]:
                    found[legs] = rc
    best = sorted(found.items(), key=lambda kv: (kv[1], kv[0]))[:k]
    return [Priced(make_itinerary(inst, oid, legs), rc) for legs, rc in best]


def enumerate_cargo_itineraries(inst: RecoveryInstance, oid: str, registry: TimeRegistry,
                                fixed: bool | None = None, allow_short: ShortFilter = _always,
                                limit: int = 200_000) -> list[tuple]:
    """Every source-to-sink itinerary the label search could build, without dominance."""
    fixed = registry.frozen if fixed is None else fixed
    succ = _successors(inst, oid)
    out = []

    def walk(legs):
        i, ti = legs[-1]
        if inst.cargo_sink_ok(oid, i):
            out.append(tuple(legs))
            if len(out) > limit:
                raise OverflowError("too many itineraries to enumerate")
        for j in succ[i]:
            for t in cargo_options(inst, i, ti, j, _candidates(inst, registry, j), fixed, allow_short(i, j)):
                legs.append((j, t))
                walk(legs)
                legs.pop()

    for f in succ:
        if inst.cargo_source_ok(oid, f):
            for t in first_options(inst, f, _candidates(inst, registry, f), fixed):
                walk([(f, t)])
    return out


def itinerary_label_cost(inst: RecoveryInstance, oid: str, legs, duals: DualValues) -> float:
    """Reduced cost of an itinerary assembled term by term, as the labels accumulate it."""
    total = 0.0
    for n, (f, t) in enumerate(legs):
        total += cargo_leg_value(inst, oid, f, t, duals)
        if n:
            g, s = legs[n - 1]
            if inst.is_short(g, s, f, t):
                total += duals.e(g, s, f, t)
    f, t = legs[-1]
    return total + inst.cargo_delay_cost(oid, inst.arrival(f, t)) - duals.th(oid)
