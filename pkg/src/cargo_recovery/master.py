"""Restricted master problem over aircraft strings and cargo itineraries.

Rows are keyed tuples:

* ``("cover", f)``        flight flown once or canceled
* ``("aircraft", a)``     at most one string per aircraft
* ``("cargo", o)``        shipped plus canceled volume equals demand
* ``("cap", f, t)``       capacity of the copy of ``f`` departing at ``t``
* ``("sc", f, t, g, s)``  cargo on a short connection needs a through aircraft
* ``("vi", o, f, t)``     cargo on ``f@t`` forbids flying ``f`` at another time

Capacity, short-connection and valid-inequality rows are created on demand
when the first column that touches them is added.
"""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from .domain import CargoAssignment, RecoveryPlan
from .instance import MANDATORY_PENALTY, RecoveryInstance
from .lp import Infeasible, LinearProgram, LpSolution, maybe_dump, solve_lp, solve_mip
from .registry import TimeRegistry

log = logging.getLogger(__name__)

Leg = tuple[str, int]


@dataclass(frozen=True)
class AircraftString:
    aircraft: str
    legs: tuple[Leg, ...]
    cost: float

    @property
    def key(self):
        return ("x", self.aircraft, self.legs)

    def pairs(self):
        return [(f, t, g, s) for (f, t), (g, s) in zip(self.legs, self.legs[1:])]


@dataclass(frozen=True)
class CargoItinerary:
    cargo: str
    legs: tuple[Leg, ...]
    cost: float
    short: tuple[tuple[str, int, str, int], ...] = ()

    @property
    def key(self):
        return ("w", self.cargo, self.legs)


def make_string(inst: RecoveryInstance, aircraft: str, legs) -> AircraftString:
    legs = tuple((f, int(t)) for f, t in legs)
    return AircraftString(aircraft, legs, inst.string_cost(aircraft, legs))


def make_itinerary(inst: RecoveryInstance, cargo: str, legs) -> CargoItinerary:
    legs = tuple((f, int(t)) for f, t in legs)
    short = tuple(
        (f, t, g, s) for (f, t), (g, s) in zip(legs, legs[1:]) if inst.is_short(f, t, g, s)
    )
    return CargoItinerary(cargo, legs, inst.itinerary_unit_cost(cargo, legs), short)


@dataclass(frozen=True)
class DualValues:
    """Row duals by family; anything not present reads as zero."""

    alpha: Mapping[str, float] = field(default_factory=dict)
    beta: Mapping[str, float] = field(default_factory=dict)
    theta: Mapping[str, float] = field(default_factory=dict)
    gamma: Mapping[tuple, float] = field(default_factory=dict)
    eta: Mapping[tuple, float] = field(default_factory=dict)
    pi: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        by_flight: dict[str, float] = defaultdict(float)
        by_copy: dict[tuple, float] = defaultdict(float)
        for (o, f, t), v in self.pi.items():
            by_flight[f] += v
            by_copy[(f, t)] += v
        object.__setattr__(self, "_pi_flight", dict(by_flight))
        object.__setattr__(self, "_pi_copy", dict(by_copy))

    def a(self, f):
        return self.alpha.get(f, 0.0)

    def b(self, a):
        return self.beta.get(a, 0.0)

    def th(self, o):
        return self.theta.get(o, 0.0)

    def g(self, f, t):
        return self.gamma.get((f, t), 0.0)

    def e(self, f, t, g, s):
        return self.eta.get((f, t, g, s), 0.0)

    def p(self, o, f, t):
        return self.pi.get((o, f, t), 0.0)

    def pi_other_times(self, f, t):
        """Sum of pi over every cargo and every registered time of ``f`` other than ``t``."""
        return self._pi_flight.get(f, 0.0) - self._pi_copy.get((f, t), 0.0)

    @classmethod
    def from_rows(cls, duals: Mapping) -> "DualValues":
        fam = defaultdict(dict)
        for rid, v in duals.items():
            kind = rid[0]
            if kind == "cover":
                fam["alpha"][rid[1]] = v
            elif kind == "aircraft":
                fam["beta"][rid[1]] = v
            elif kind == "cargo":
                fam["theta"][rid[1]] = v
            elif kind == "cap":
                fam["gamma"][rid[1:]] = v
            elif kind == "sc":
                fam["eta"][rid[1:]] = v
            elif kind == "vi":
                fam["pi"][rid[1:]] = v
        return cls(**fam)


@dataclass
class RowsAdded:
    cap: int = 0
    sc: int = 0
    vi: int = 0

    @property
    def total(self) -> int:
        return self.cap + self.sc + self.vi

    def __iadd__(self, other: "RowsAdded"):
        self.cap += other.cap
        self.sc += other.sc
        self.vi += other.vi
        return self


class MasterState:
    def __init__(self, inst: RecoveryInstance, with_vi: bool = True, eager_vi: bool = False,
                 registry: TimeRegistry | None = None, aircraft_only: bool = False):
        self.inst = inst
        self.aircraft_only = aircraft_only
        self.with_vi = with_vi
        self.eager_vi = eager_vi
        self.registry = registry or TimeRegistry(inst)
        self.lp = LinearProgram("master")
        self.strings: dict = {}
        self.itineraries: dict = {}
        self.cap_rows: set = set()
        self.sc_rows: set = set()
        self.vi_rows: set = set()
        self._strings_by_flight = defaultdict(list)
        self._strings_by_pair = defaultdict(list)
        self._itins_by_leg = defaultdict(list)
        self._itins_by_sc = defaultdict(list)
        self._vi_by_flight = defaultdict(set)
        for f in inst.flight_order:
            self.lp.add_constraint(("cover", f), "=", 1.0)
            fl = inst.flights[f]
            cost = MANDATORY_PENALTY if fl.mandatory else inst.cancel_cost(f)
            self.lp.add_variable(("y", f), 0.0, 1.0, cost, True, {("cover", f): 1.0}, priority=1)
        for a in inst.aircraft:
            self.lp.add_constraint(("aircraft", a), "<=", 1.0)
        for oid, o in ([] if aircraft_only else inst.cargo.items()):
            self.lp.add_constraint(("cargo", oid), "=", float(o.volume))
            self.lp.add_variable(("z", oid), 0.0, float(o.volume), inst.cargo_cancel_cost(oid), True,
                                 {("cargo", oid): 1.0})

    # --- rows ------------------------------------------------------------------

    def _new_cap_row(self, f, t) -> RowsAdded:
        added = RowsAdded()
        if (f, t) in self.cap_rows or self.aircraft_only or self.inst.flights[f].mandatory:
            return added
        row = {}
        for key in self._strings_by_flight[f]:
            col = self.strings[key]
            if (f, t) in col.legs:
                cap = self.inst.capacity(col.aircraft, f)
                if cap:
                    row[key] = float(cap)
        for key in self._itins_by_leg[(f, t)]:
            row[key] = -1.0
        self.lp.add_constraint(("cap", f, t), ">=", 0.0, row)
        self.cap_rows.add((f, t))
        added.cap += 1
        if self.with_vi and self.eager_vi:
            for oid in self.inst.cargo:
                added += self._new_vi_row(oid, f, t)
        return added

    def _new_sc_row(self, sc) -> RowsAdded:
        if sc in self.sc_rows:
            return RowsAdded()
        f, t, g, s = sc
        row = {}
        for key in self._strings_by_pair[sc]:
            row[key] = float(self.inst.aircraft[self.strings[key].aircraft].capacity)
        for key in self._itins_by_sc[sc]:
            row[key] = -1.0
        self.lp.add_constraint(("sc",) + sc, ">=", 0.0, row)
        self.sc_rows.add(sc)
        self.registry.add_short(sc)
        return RowsAdded(sc=1)

    def _new_vi_row(self, oid, f, t) -> RowsAdded:
        if (oid, f, t) in self.vi_rows:
            return RowsAdded()
        d = float(self.inst.cargo[oid].volume)
        row = {}
        for key in self._strings_by_flight[f]:
            if any(g == f and s != t for g, s in self.strings[key].legs):
                row[key] = 1.0
        for key in self._itins_by_leg[(f, t)]:
            if key[1] == oid:
                row[key] = 1.0 / d
        self.lp.add_constraint(("vi", oid, f, t), "<=", 1.0, row)
        self.vi_rows.add((oid, f, t))
        self._vi_by_flight[f].add((oid, t))
        return RowsAdded(vi=1)

    # --- columns ---------------------------------------------------------------

    def coefficients(self, col) -> dict:
        """Coefficients ``col`` has (or would have) in the rows that currently exist."""
        inst = self.inst
        coefs = {}
        if isinstance(col, AircraftString):
            coefs[("aircraft", col.aircraft)] = 1.0
            for f, t in col.legs:
                coefs[("cover", f)] = 1.0
                cap = inst.capacity(col.aircraft, f)
                if (f, t) in self.cap_rows and cap:
                    coefs[("cap", f, t)] = float(cap)
                for oid, t2 in self._vi_by_flight.get(f, ()):
                    if t2 != t:
                        coefs[("vi", oid, f, t2)] = 1.0
            for sc in col.pairs():
                if sc in self.sc_rows:
                    coefs[("sc",) + sc] = float(inst.aircraft[col.aircraft].capacity)
        else:
            d = float(inst.cargo[col.cargo].volume)
            coefs[("cargo", col.cargo)] = 1.0
            for f, t in col.legs:
                if (f, t) in self.cap_rows:
                    coefs[("cap", f, t)] = -1.0
                if (col.cargo, f, t) in self.vi_rows:
                    coefs[("vi", col.cargo, f, t)] = 1.0 / d
            for sc in col.short:
                if sc in self.sc_rows:
                    coefs[("sc",) + sc] = -1.0
        return coefs

    def reduced_cost(self, col, duals: Mapping) -> float:
        """Column cost minus the dual-weighted coefficients, straight from the row duals."""
        return col.cost - sum(v * duals.get(rid, 0.0) for rid, v in self.coefficients(col).items())

    def add_column(self, col) -> RowsAdded:
        if col.key in self.strings or col.key in self.itineraries:
            log.debug("duplicate column %s ignored", col.key)
            return RowsAdded()
        added = RowsAdded()
        for f, t in col.legs:
            self.registry.add_time(f, t)
            added += self._new_cap_row(f, t)
        if isinstance(col, CargoItinerary):
            for sc in col.short:
                added += self._new_sc_row(sc)
            if self.with_vi:
                for f, t in col.legs:
                    added += self._new_vi_row(col.cargo, f, t)
        coefs = self.coefficients(col)
        if isinstance(col, AircraftString):
            self.lp.add_variable(col.key, 0.0, 1.0, col.cost, True, coefs, priority=1)
            self.strings[col.key] = col
            for f, _ in col.legs:
                self._strings_by_flight[f].append(col.key)
            for sc in col.pairs():
                self._strings_by_pair[sc].append(col.key)
        else:
            ub = float(self.inst.cargo[col.cargo].volume)
            self.lp.add_variable(col.key, 0.0, ub, col.cost, True, coefs)
            self.itineraries[col.key] = col
            for leg in col.legs:
                self._itins_by_leg[leg].append(col.key)
            for sc in col.short:
                self._itins_by_sc[sc].append(col.key)
        return added

    @property
    def n_strings(self) -> int:
        return len(self.strings)

    @property
    def n_itineraries(self) -> int:
        return len(self.itineraries)


# --- initial columns -------------------------------------------------------------


def _retime(inst: RecoveryInstance, registry: TimeRegistry, fid: str, earliest: int):
    if registry.frozen:
        for t in registry.candidates(fid):
            if t >= earliest and inst.copy_ok(fid, t):
                return t
        return None
    return inst.earliest_departure(fid, earliest)


def original_strings(inst: RecoveryInstance, registry: TimeRegistry) -> dict[str, tuple[Leg, ...]]:
    """Each aircraft's original rotation, pushed later only as far as disruptions force.

    A rotation is cut at the first flight it can no longer reach. AOG flights
    are slotted into their aircraft's rotation by scheduled time.
    """
    sched = inst.scenario.schedule
    out = {}
    for aid, a in inst.aircraft.items():
        order = list(sched.aircraft[aid].original_string)
        aogs = [f for f, fl in inst.flights.items() if fl.aog_aircraft == aid]
        order = sorted(order + aogs, key=lambda f: inst.flights[f].order)
        legs = _chain(inst, registry, aid, order)
        if aogs and not all(any(f == g for g, _ in legs) for f in aogs):
            legs = _chain(inst, registry, aid, aogs)
        out[aid] = tuple(legs)
    return out


def _chain(inst, registry, aid, order):
    a = inst.aircraft[aid]
    where, ready, prev = a.airport, a.ready, None
    legs = []
    for fid in order:
        f = inst.flights[fid]
        if f.origin != where:
            break
        earliest = ready if prev is None else ready + inst.turn(prev, fid)
        t = _retime(inst, registry, fid, max(earliest, f.sched_dep))
        if t is None:
            break
        legs.append((fid, t))
        where, ready, prev = f.destination, t + f.fly_time, fid
    return legs


def original_itineraries(inst: RecoveryInstance, strings: dict[str, tuple[Leg, ...]]) -> list[CargoItinerary]:
    when = {f: t for legs in strings.values() for f, t in legs}
    nxt = {}
    for legs in strings.values():
        for x, y in zip(legs, legs[1:]):
            nxt[x] = y
    out = []
    for oid, o in inst.cargo.items():
        if not all(f in when for f in o.original_itinerary):
            continue
        legs = tuple((f, when[f]) for f in o.original_itinerary)
        ok = inst.cargo_source_ok(oid, legs[0][0]) and inst.cargo_sink_ok(oid, legs[-1][0])
        for x, y in zip(legs, legs[1:]):
            if not ok:
                break
            if not inst.cargo_extends(oid, x[0]) or not inst.can_connect(x[0], x[1], y[0], y[1]):
                ok = False
            elif inst.is_short(x[0], x[1], y[0], y[1]) and nxt.get(x) != y:
                ok = False
        if ok:
            out.append(make_itinerary(inst, oid, legs))
    return out


def init_master(inst: RecoveryInstance, with_vi: bool = True, registry: TimeRegistry | None = None,
                eager_vi: bool = False) -> MasterState:
    ms = MasterState(inst, with_vi=with_vi, eager_vi=eager_vi, registry=registry)
    for f in inst.flight_order:
        ms._new_cap_row(f, inst.flights[f].sched_dep)
    strings = original_strings(inst, ms.registry)
    for aid, legs in strings.items():
        if legs:
            col = make_string(inst, aid, legs)
            for sc in col.pairs():
                if inst.is_short(*sc) and not inst.flights[sc[0]].mandatory and not inst.flights[sc[2]].mandatory:
                    ms._new_sc_row(sc)
            ms.add_column(col)
    for col in original_itineraries(inst, strings):
        ms.add_column(col)
    return ms


# --- solving ---------------------------------------------------------------------


def solve_master_lp(ms: MasterState) -> tuple[LpSolution, DualValues]:
    sol = solve_lp(ms.lp)
    if not sol.optimal:
        raise Infeasible(f"master LP status {sol.status}")
    return sol, DualValues.from_rows(sol.duals)


@dataclass
class MasterMip:
    plan: RecoveryPlan
    objective: float
    status: str
    nodes: int


def decode_master(ms: MasterState, primal: Mapping) -> RecoveryPlan:
    inst = ms.inst
    strings = {a: () for a in inst.aircraft}
    for key, col in ms.strings.items():
        if primal.get(key, 0.0) > 0.5:
            strings[col.aircraft] = col.legs
    canceled = tuple(f for f in inst.flight_order if primal.get(("y", f), 0.0) > 0.5)
    for f in canceled:
        if inst.flights[f].mandatory:
            raise Infeasible(f"mandatory flight {f} cannot be covered")
    shipments = []
    for key, col in ms.itineraries.items():
        q = int(round(primal.get(key, 0.0)))
        if q > 0:
            shipments.append(CargoAssignment(col.cargo, col.legs, q))
    shipments.sort(key=lambda s: (s.cargo, s.legs))
    dropped = {o: int(round(primal.get(("z", o), 0.0))) for o in inst.cargo}
    return RecoveryPlan(strings, canceled, tuple(shipments), dropped)


def solve_master_mip(ms: MasterState, time_limit: float = 600.0) -> MasterMip:
    maybe_dump(ms.lp, "master")
    sol = solve_mip(ms.lp, time_limit=time_limit)
    return MasterMip(decode_master(ms, sol.primal), sol.objective, sol.status, sol.nodes)


def integrality_gap(lp: float, ip: float) -> float:
    if abs(lp) < 1e-9:
        return 0.0 if abs(ip) < 1e-9 else math.inf
    return (ip - lp) / lp
