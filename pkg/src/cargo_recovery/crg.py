"""Column-and-row generation driver, its predictor-filtered variants, and the two-stage baseline."""
from __future__ import annotations

import csv
import logging
import math
import os
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .aircraft_pricing import NEGATIVE, enumerate_aircraft_strings, price_aircraft
from .arc_model import as_instance
from .cargo_pricing import enumerate_cargo_itineraries, price_cargo
from .domain import CargoAssignment, CostBreakdown, RecoveryPlan, plan_cost
from .instance import RecoveryInstance
from .lp import Infeasible, LinearProgram, solve_lp, solve_mip
from .master import (
    DualValues,
    MasterState,
    RowsAdded,
    init_master,
    integrality_gap,
    make_itinerary,
    make_string,
    original_itineraries,
    original_strings,
    solve_master_lp,
    solve_master_mip,
)
from .predictor import FEATURES, ModelMissing, TreeModel, aggregate
from .registry import TimeRegistry

log = logging.getLogger(__name__)

MODES = ("crg", "ml-crg", "heur-crg")


class IterationLimit(Exception):
    pass


def pricing_threads() -> int:
    try:
        return max(1, int(os.environ.get("CARGO_RECOVERY_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class CrgConfig:
    mode: str = "crg"
    with_vi: bool = True
    eager_vi: bool = False
    max_iterations: int = 200
    columns_per_pricing: int = 10
    registry_cap: int = 64
    grid: dict[str, list[int]] | None = None
    exact: bool = False
    predictor: TreeModel | Callable | None = None
    time_limit: float = 600.0
    threads: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "ml-crg" and self.predictor is None:
            raise ModelMissing("ml-crg mode needs a trained predictor")


# --- iteration log and connection observations -----------------------------------


@dataclass
class IterationRecord:
    iteration: int
    lp_objective: float
    new_strings: int
    new_itineraries: int
    cap_rows_added: int
    sc_rows_added: int
    vi_rows_added: int
    total_rows: int
    total_columns: int
    sc_rows: int

    FIELDS = (
        "iteration", "lp_objective", "new_strings", "new_itineraries", "cap_rows_added",
        "sc_rows_added", "vi_rows_added", "total_rows", "total_columns", "sc_rows",
    )


@dataclass
class IterationLog:
    records: list[IterationRecord] = field(default_factory=list)
    connections: list[tuple[int, str, float, float, bool]] = field(default_factory=list)

    def connection_rows(self) -> list[dict]:
        return [
            {"iteration": it, "connection_id": con, "h1": h1, "h2": h2, "selected": sel}
            for it, con, h1, h2, sel in self.connections
        ]

    def write(self, path) -> tuple[Path, Path]:
        """Iterations to ``path``; connection observations next to it as ``<stem>_connections.csv``."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(IterationRecord.FIELDS)
            for r in self.records:
                w.writerow([_fmt(getattr(r, name)) for name in IterationRecord.FIELDS])
        con_path = path.with_name(path.stem + "_connections.csv")
        with open(con_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iteration", "connection_id", "h1", "h2", "selected"))
            for it, con, h1, h2, sel in self.connections:
                w.writerow((it, con, _fmt(h1), _fmt(h2), int(sel)))
        return path, con_path


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return v


def connection_id(i: str, j: str) -> str:
    return f"{i}>{j}"


class ConnectionTracker:
    """Per-iteration gap shortfall and uncovered volume of every connection cargo could use.

    Connections that were already short in the original rotations are not
    tracked: they are short by construction.
    """

    def __init__(self, inst: RecoveryInstance):
        self.inst = inst
        self.original = inst.original_short_connections()
        self.users: dict[tuple[str, str], list[str]] = defaultdict(list)
        for oid in inst.cargo:
            for con in _cargo_connections(inst, oid):
                if con not in self.original:
                    self.users[con].append(oid)
        self.history: dict[tuple[str, str], list[tuple[float, float]]] = defaultdict(list)
        self.selected: set[tuple[str, str]] = set()

    def observe(self, iteration: int, ms: MasterState, primal, log: IterationLog | None) -> None:
        inst = self.inst
        when, weight = {}, {}
        for key, col in ms.strings.items():
            v = primal.get(key, 0.0)
            if v <= 1e-9:
                continue
            for f, t in col.legs:
                if v > weight.get(f, 0.0) + 1e-12:
                    weight[f], when[f] = v, t
        uncovered = {o: primal.get(("z", o), 0.0) for o in inst.cargo}
        now_selected = set()
        for key, col in ms.itineraries.items():
            if primal.get(key, 0.0) > 1e-9:
                for f, _, g, _ in col.short:
                    now_selected.add((f, g))
        for con in sorted(self.users):
            i, j = con
            ti = when.get(i, inst.flights[i].sched_dep)
            tj = when.get(j, inst.flights[j].sched_dep)
            h1 = float(tj - (ti + inst.flights[i].fly_time) - inst.trans_time)
            h2 = float(sum(uncovered[o] for o in self.users[con]))
            sel = con in now_selected
            if con not in self.selected:
                self.history[con].append((h1, h2))
            if sel:
                self.selected.add(con)
            if log is not None:
                log.connections.append((iteration, connection_id(i, j), h1, h2, sel))

    def features(self, con: tuple[str, str]) -> dict[str, float] | None:
        obs = self.history.get(con)
        if not obs:
            return None
        return aggregate([h for h, _ in obs], [v for _, v in obs])


def _cargo_connections(inst: RecoveryInstance, oid: str) -> set[tuple[str, str]]:
    """Flight pairs on some source-to-sink path of the order's static network."""
    flights = inst.regular_flights()
    succ = {
        f: [g for g in flights if inst.can_follow(f, g)] if inst.cargo_extends(oid, f) else []
        for f in flights
    }
    pred = defaultdict(list)
    for f, gs in succ.items():
        for g in gs:
            pred[g].append(f)
    fwd = deque(f for f in flights if inst.cargo_source_ok(oid, f))
    reach = set(fwd)
    while fwd:
        f = fwd.popleft()
        for g in succ[f]:
            if g not in reach:
                reach.add(g)
                fwd.append(g)
    back = deque(f for f in flights if inst.cargo_sink_ok(oid, f))
    coreach = set(back)
    while back:
        g = back.popleft()
        for f in pred[g]:
            if f not in coreach:
                coreach.add(f)
                back.append(f)
    return {(f, g) for f in reach for g in succ[f] if g in coreach}


# --- short-connection filters ---------------------------------------------------------


def make_filter(cfg: CrgConfig, inst: RecoveryInstance, tracker: ConnectionTracker):
    """Decides per flight pair whether cargo pricing may offer a short connection."""
    if cfg.mode == "crg":
        return lambda i, j: True
    original = tracker.original
    if cfg.mode == "heur-crg":
        return lambda i, j: (i, j) in original
    model = cfg.predictor

    def keep(i, j):
        con = (i, j)
        if con in original or con in tracker.selected:
            return True
        feats = tracker.features(con)
        if feats is None:
            return True
        return bool(predict_filter(model, feats))

    return keep


def predict_filter(model, features) -> bool:
    """Model verdict for one connection; a plain callable acts as a fixed predictor."""
    if model is None:
        raise ModelMissing("no predictor given")
    if isinstance(model, TreeModel):
        return model.predict_vector([float(features[name]) for name in FEATURES]) == 1
    return bool(model(features))


# --- the driver ---------------------------------------------------------------------


@dataclass
class CrgResult:
    plan: RecoveryPlan
    cost: CostBreakdown
    lp_objective: float
    ip_objective: float
    gap: float
    iterations: int
    status: str
    log: IterationLog
    lp_history: list[float]
    n_strings: int
    n_itineraries: int
    n_cap_rows: int
    n_sc_rows: int
    n_vi_rows: int
    registry: dict[str, list[int]]
    master: MasterState | None = None
    priced: list = field(default_factory=list)


def cost_floor(inst: RecoveryInstance) -> float:
    """A lower bound on any recovery cost: zero when no cost entry is negative."""
    costs = list(inst.costs.__dict__.values())
    costs += [inst.cancel_cost(f) for f in inst.flight_order]
    costs += [inst.cargo_cancel_cost(o) for o in inst.cargo]
    return 0.0 if min(costs) >= 0 else -math.inf


def _price_round(inst, ms: MasterState, duals: DualValues, cfg: CrgConfig, allow_short):
    threads = cfg.threads or pricing_threads()
    k = cfg.columns_per_pricing
    reg = ms.registry
    aircraft = list(inst.aircraft)
    cargo = list(inst.cargo)
    jobs = [lambda a=a: price_aircraft(inst, a, duals, reg, k) for a in aircraft]
    jobs += [lambda o=o: price_cargo(inst, o, duals, reg, k, allow_short=allow_short) for o in cargo]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: job(), jobs))
    else:
        results = [job() for job in jobs]
    return [p for batch in results for p in batch]


def _enumerate_columns(inst, ms: MasterState, duals_raw, threshold: float, allow_short):
    """Columns not yet in the master whose reduced cost is at most ``threshold``."""
    reg = ms.registry
    out = []
    for a in inst.aircraft:
        for legs in enumerate_aircraft_strings(inst, a, reg):
            col = make_string(inst, a, legs)
            if col.key not in ms.strings:
                rc = ms.reduced_cost(col, duals_raw)
                if rc <= threshold:
                    out.append((rc, col))
    for o in inst.cargo:
        for legs in enumerate_cargo_itineraries(inst, o, reg, allow_short=allow_short):
            col = make_itinerary(inst, o, legs)
            if col.key not in ms.itineraries:
                rc = ms.reduced_cost(col, duals_raw)
                if rc <= threshold:
                    out.append((rc, col))
    out.sort(key=lambda rc_col: (rc_col[0], rc_col[1].key))
    return [col for _, col in out]


def run_crg(scn, cfg: CrgConfig | None = None, keep_master: bool = False) -> CrgResult:
    cfg = cfg or CrgConfig()
    inst = as_instance(scn)
    registry = TimeRegistry(inst, cap=cfg.registry_cap, grid=cfg.grid)
    ms = init_master(inst, with_vi=cfg.with_vi, registry=registry, eager_vi=cfg.eager_vi)
    tracker = ConnectionTracker(inst)
    allow_short = make_filter(cfg, inst, tracker)
    itlog = IterationLog()
    history = []
    priced_all = []
    status = "Optimal"
    floor = cost_floor(inst)
    it = 0
    while True:
        it += 1
        sol, duals = solve_master_lp(ms)
        history.append(sol.objective)
        tracker.observe(it, ms, sol.primal, itlog)
        if it > cfg.max_iterations:
            status = "IterationLimit"
            log.warning("iteration limit %d reached before pricing converged", cfg.max_iterations)
            break
        if sol.objective <= floor + 1e-9:
            # nothing can beat a master already at the cost floor, whatever the duals say
            priced = []
        else:
            priced = _price_round(inst, ms, duals, cfg, allow_short)
            priced = [p for p in priced if p.column.key not in ms.strings and p.column.key not in ms.itineraries]
        added = RowsAdded()
        n_str = n_itin = 0
        for p in priced:
            if keep_master:
                priced_all.append((it, p, dict(sol.duals)))
            added += ms.add_column(p.column)
            if p.column.key in ms.strings:
                n_str += 1
            else:
                n_itin += 1
        itlog.records.append(IterationRecord(
            it, sol.objective, n_str, n_itin, added.cap, added.sc, added.vi,
            ms.lp.num_rows, ms.lp.num_vars, len(ms.sc_rows),
        ))
        log.info("iteration %d: LP %.4f, +%d strings, +%d itineraries, +%d rows",
                 it, sol.objective, n_str, n_itin, added.total)
        if not priced:
            break
    if cfg.exact:
        # close the pricing gap with dominance-free enumeration, then close the
        # integrality gap by adding every column that could still pay off
        while True:
            extra = _enumerate_columns(inst, ms, sol.duals, NEGATIVE, allow_short)
            if not extra:
                break
            for col in extra:
                ms.add_column(col)
            sol, duals = solve_master_lp(ms)
            history.append(sol.objective)
    lp_value = sol.objective
    mip = solve_master_mip(ms, cfg.time_limit)
    if cfg.exact:
        extra = _enumerate_columns(inst, ms, sol.duals, mip.objective - lp_value + 1e-6, allow_short)
        if extra:
            for col in extra:
                ms.add_column(col)
            mip = solve_master_mip(ms, cfg.time_limit)
    if mip.status == "TimeLimit":
        status = "TimeLimit"
    cost = plan_cost(mip.plan, inst.scenario)
    if abs(cost.total - mip.objective) > 0.005:
        raise AssertionError(f"re-costed plan {cost.total:.4f} differs from MIP objective {mip.objective:.4f}")
    return CrgResult(
        plan=mip.plan,
        cost=cost,
        lp_objective=lp_value,
        ip_objective=mip.objective,
        gap=integrality_gap(lp_value, mip.objective),
        iterations=it,
        status=status,
        log=itlog,
        lp_history=history,
        n_strings=ms.n_strings,
        n_itineraries=ms.n_itineraries,
        n_cap_rows=len(ms.cap_rows),
        n_sc_rows=len(ms.sc_rows),
        n_vi_rows=len(ms.vi_rows),
        registry=registry.snapshot(),
        master=ms if keep_master else None,
        priced=priced_all if keep_master else [],
    )


# --- sequential baseline ---------------------------------------------------------------


@dataclass
class SequentialResult:
    plan: RecoveryPlan
    cost: CostBreakdown
    flight_objective: float
    cargo_objective: float


def _flight_stage(inst: RecoveryInstance, cfg: CrgConfig):
    registry = TimeRegistry(inst, cap=cfg.registry_cap, grid=cfg.grid)
    ms = MasterState(inst, with_vi=False, registry=registry, aircraft_only=True)
    for aid, legs in original_strings(inst, registry).items():
        if legs:
            ms.add_column(make_string(inst, aid, legs))
    for _ in range(cfg.max_iterations):
        sol, duals = solve_master_lp(ms)
        priced = [p for a in inst.aircraft for p in price_aircraft(inst, a, duals, registry, cfg.columns_per_pricing)]
        priced = [p for p in priced if p.column.key not in ms.strings]
        if not priced:
            break
        for p in priced:
            ms.add_column(p.column)
    mip = solve_master_mip(ms, cfg.time_limit)
    return mip.plan.strings, mip.plan.canceled_flights, mip.objective


def _cargo_stage(inst: RecoveryInstance, strings, cfg: CrgConfig):
    flown = {f: (a, t) for a, legs in strings.items() for f, t in legs if not inst.flights[f].mandatory}
    through = {(x[0], y[0]) for legs in strings.values() for x, y in zip(legs, legs[1:])}
    registry = TimeRegistry(inst, grid={f: [t] for f, (_, t) in flown.items()}, strict=True)
    p = LinearProgram("cargo-stage")
    for oid, o in inst.cargo.items():
        p.add_constraint(("cargo", oid), "=", float(o.volume))
        p.add_variable(("z", oid), 0.0, float(o.volume), inst.cargo_cancel_cost(oid), True, {("cargo", oid): 1.0})
    for f, (a, t) in sorted(flown.items()):
        p.add_constraint(("cap", f, t), ">=", -float(inst.capacity(a, f)))
    columns = {}

    def add(col):
        if col.key in columns:
            return
        columns[col.key] = col
        coefs = {("cargo", col.cargo): 1.0}
        for f, t in col.legs:
            coefs[("cap", f, t)] = -1.0
        p.add_variable(col.key, 0.0, float(inst.cargo[col.cargo].volume), col.cost, True, coefs)

    allow_short = lambda i, j: (i, j) in through  # noqa: E731
    for col in original_itineraries(inst, strings):
        add(col)
    for _ in range(cfg.max_iterations):
        sol = solve_lp(p)
        if not sol.optimal:
            raise Infeasible(f"cargo stage LP status {sol.status}")
        duals = DualValues.from_rows(sol.duals)
        priced = [
            q for o in inst.cargo
            for q in price_cargo(inst, o, duals, registry, cfg.columns_per_pricing, allow_short=allow_short)
        ]
        fresh = [q for q in priced if q.column.key not in columns]
        if not fresh:
            break
        for q in fresh:
            add(q.column)
    sol = solve_mip(p, time_limit=cfg.time_limit)
    shipments = []
    for key, col in columns.items():
        q = int(round(sol.primal.get(key, 0.0)))
        if q > 0:
            shipments.append(CargoAssignment(col.cargo, col.legs, q))
    shipments.sort(key=lambda s: (s.cargo, s.legs))
    dropped = {o: int(round(sol.primal.get(("z", o), 0.0))) for o in inst.cargo}
    return tuple(shipments), dropped, sol.objective


def run_sequential(scn, cfg: CrgConfig | None = None) -> SequentialResult:
    """Recover flights and aircraft first, then route cargo on what is left."""
    cfg = cfg or CrgConfig()
    inst = as_instance(scn)
    strings, canceled, flight_obj = _flight_stage(inst, cfg)
    shipments, dropped, cargo_obj = _cargo_stage(inst, strings, cfg)
    plan = RecoveryPlan(strings, canceled, shipments, dropped)
    cost = plan_cost(plan, inst.scenario)
    if abs(cost.total - (flight_obj + cargo_obj)) > 0.005:
        raise AssertionError("sequential plan cost differs from its stage objectives")
    return SequentialResult(plan, cost, flight_obj, cargo_obj)
