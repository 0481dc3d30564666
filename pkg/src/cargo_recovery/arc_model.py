"""Arc formulation on a network of flight copies.

Every flight is copied once per allowed departure on a delay grid. Aircraft
route one unit of flow from their source to their sink through copies, cargo
orders route integer ULD flow from origin to destination, and each copy offers
the capacity of whichever aircraft flies it. Cargo may use a short connection
only if the same aircraft flies both copies back to back.
"""
from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field

from .domain import CargoAssignment, CostBreakdown, RecoveryPlan, Scenario, plan_cost
from .instance import RecoveryInstance, compile_scenario
from .lp import LinearProgram, maybe_dump, solve_mip

log = logging.getLogger(__name__)

SRC = ("src",)
SNK = ("snk",)


class EmptyNetwork(Exception):
    pass


def as_instance(scn) -> RecoveryInstance:
    return scn if isinstance(scn, RecoveryInstance) else compile_scenario(scn)


@dataclass
class CopyNetwork:
    inst: RecoveryInstance
    times: dict[str, list[int]]
    edges: list[tuple[tuple[str, int], tuple[str, int]]]
    short_edges: set = field(default_factory=set)
    grid: tuple[int, int] | None = None

    @property
    def nodes(self) -> list[tuple[str, int]]:
        return [(f, t) for f in self.inst.flight_order for t in self.times.get(f, [])]

    def copies(self, fid: str) -> int:
        return len(self.times.get(fid, []))

    def aircraft_arcs(self, aircraft: str) -> list[tuple]:
        inst = self.inst
        ok = {n for n in self.nodes if inst.allowed(aircraft, n[0])}
        arcs = [(SRC, n) for n in self.nodes if n in ok and inst.starts_at(aircraft, n[0], n[1])]
        arcs += [(i, j) for i, j in self.edges if i in ok and j in ok]
        arcs = _prune(arcs, sink_from_all=True)
        return arcs + [(n, SNK) for n in sorted({h for _, h in arcs}, key=_node_key)] + [(SRC, SNK)]

    def cargo_arcs(self, oid: str) -> list[tuple]:
        inst = self.inst
        nodes = [n for n in self.nodes if not inst.flights[n[0]].mandatory]
        arcs = [(SRC, n) for n in nodes if inst.cargo_source_ok(oid, n[0])]
        arcs += [
            (i, j) for i, j in self.edges
            if not inst.flights[i[0]].mandatory and not inst.flights[j[0]].mandatory and inst.cargo_extends(oid, i[0])
        ]
        arcs += [(n, SNK) for n in nodes if inst.cargo_sink_ok(oid, n[0])]
        return _prune(arcs, sink_from_all=False)


def _node_key(n):
    return (n[0], n[1]) if len(n) == 2 else ("", -1)


def _prune(arcs, sink_from_all: bool):
    """Keep arcs on some source-to-sink path (every node reaches the sink when ``sink_from_all``)."""
    out_adj, in_adj = defaultdict(list), defaultdict(list)
    for i, j in arcs:
        out_adj[i].append(j)
        in_adj[j].append(i)
    seen = {SRC}
    queue = deque([SRC])
    while queue:
        n = queue.popleft()
        for m in out_adj[n]:
            if m not in seen:
                seen.add(m)
                queue.append(m)
    if sink_from_all:
        return [(i, j) for i, j in arcs if i in seen]
    back = {SNK}
    queue = deque([SNK])
    while queue:
        n = queue.popleft()
        for m in in_adj[n]:
            if m not in back:
                back.add(m)
                queue.append(m)
    return [(i, j) for i, j in arcs if i in seen and j in back]


def build_copy_network(scn, max_delay: int | None = None, interval: int | None = None,
                       times: dict[str, list[int]] | None = None) -> CopyNetwork:
    """Copies per flight from a delay grid, or from explicit per-flight departure times."""
    inst = as_instance(scn)
    if times is None:
        if max_delay is None:
            max_delay = 240
        if interval is None:
            interval = 5
        if max_delay > 0 and (interval <= 0 or max_delay % interval):
            raise ValueError("interval must divide max_delay")
        grid = {f: inst.grid(f, max_delay, interval) for f in inst.flight_order}
        spec = (max_delay, interval)
    else:
        grid = {}
        for f in inst.flight_order:
            base = set(times.get(f, [])) | {inst.flights[f].sched_dep}
            grid[f] = sorted(t for t in base if inst.copy_ok(f, t))
        spec = None
    for f in inst.flight_order:
        if inst.flights[f].mandatory and not grid[f]:
            raise EmptyNetwork(f"mandatory flight {f} has no feasible copy")
    nodes = [(f, t) for f in inst.flight_order for t in grid[f]]
    by_origin = defaultdict(list)
    for n in nodes:
        by_origin[inst.flights[n[0]].origin].append(n)
    edges, short = [], set()
    for i in nodes:
        fi = inst.flights[i[0]]
        for j in by_origin[fi.destination]:
            if inst.can_connect(i[0], i[1], j[0], j[1]):
                edges.append((i, j))
                if inst.is_short(i[0], i[1], j[0], j[1]):
                    short.add((i, j))
    return CopyNetwork(inst, grid, edges, short, spec)


@dataclass
class ArcResult:
    plan: RecoveryPlan
    cost: CostBreakdown
    objective: float
    network: CopyNetwork
    n_vars: int
    n_rows: int
    status: str


def build_arc_program(net: CopyNetwork) -> LinearProgram:
    inst = net.inst
    p = LinearProgram("arc")
    nodes = net.nodes
    for f in inst.flight_order:
        p.add_constraint(("cover", f), "=", 1.0)
    for n in nodes:
        p.add_constraint(("cap", n), ">=", 0.0)
    for e in sorted(net.short_edges):
        p.add_constraint(("sc", e), ">=", 0.0)
    for f in inst.flight_order:
        fl = inst.flights[f]
        p.add_variable(("y", f), 0.0, 0.0 if fl.mandatory else 1.0, inst.cancel_cost(f), True, {("cover", f): 1.0},
                       priority=1)
    for a in inst.aircraft:
        arcs = net.aircraft_arcs(a)
        touched = sorted({x for arc in arcs for x in arc if len(x) == 2}, key=_node_key)
        p.add_constraint(("asrc", a), "=", 1.0)
        p.add_constraint(("asnk", a), "=", 1.0)
        for n in touched:
            p.add_constraint(("abal", a, n), "=", 0.0)
        for i, j in arcs:
            col = {}
            cost = 0.0
            if i == SRC:
                col[("asrc", a)] = 1.0
            else:
                col[("abal", a, i)] = -1.0
                col[("cover", i[0])] = 1.0
                cap = inst.capacity(a, i[0])
                if cap:
                    col[("cap", i)] = float(cap)
                if (i, j) in net.short_edges:
                    col[("sc", (i, j))] = float(inst.aircraft[a].capacity)
            if j == SNK:
                col[("asnk", a)] = 1.0
            else:
                col[("abal", a, j)] = 1.0
                cost = inst.leg_cost(a, j[0], j[1])
            p.add_variable(("u", a, i, j), 0.0, 1.0, cost, True, col, priority=1)
    for oid, o in inst.cargo.items():
        arcs = net.cargo_arcs(oid)
        touched = sorted({x for arc in arcs for x in arc if len(x) == 2}, key=_node_key)
        p.add_constraint(("csrc", oid), "=", float(o.volume))
        p.add_constraint(("csnk", oid), "=", float(o.volume))
        for n in touched:
            p.add_constraint(("cbal", oid, n), "=", 0.0)
        p.add_variable(("z", oid), 0.0, float(o.volume), inst.cargo_cancel_cost(oid), True,
                       {("csrc", oid): 1.0, ("csnk", oid): 1.0})
        for i, j in arcs:
            col = {}
            cost = 0.0
            if i == SRC:
                col[("csrc", oid)] = 1.0
            else:
                col[("cbal", oid, i)] = -1.0
                col[("cap", i)] = -1.0
                if (i, j) in net.short_edges:
                    col[("sc", (i, j))] = -1.0
            if j == SNK:
                col[("csnk", oid)] = 1.0
                cost = inst.cargo_delay_cost(oid, inst.arrival(i[0], i[1]))
            else:
                col[("cbal", oid, j)] = 1.0
                cost = inst.change_cost(oid, j[0])
            p.add_variable(("v", oid, i, j), 0.0, float(o.volume), cost, True, col)
    return p


def decode_arc_solution(net: CopyNetwork, primal: dict) -> RecoveryPlan:
    inst = net.inst
    strings = {}
    for a in inst.aircraft:
        nxt = {}
        for vid, val in primal.items():
            if vid[0] == "u" and vid[1] == a and val > 0.5:
                nxt[vid[2]] = vid[3]
        legs, n = [], nxt.get(SRC)
        while n is not None and n != SNK:
            legs.append(n)
            n = nxt.get(n)
        strings[a] = tuple(legs)
    canceled = tuple(f for f in inst.flight_order if primal.get(("y", f), 0.0) > 0.5)
    shipments, dropped = [], {}
    for oid in inst.cargo:
        flow = defaultdict(int)
        for vid, val in primal.items():
            if vid[0] == "v" and vid[1] == oid and val > 0.5:
                flow[(vid[2], vid[3])] = int(round(val))
        dropped[oid] = int(round(primal.get(("z", oid), 0.0)))
        paths: dict[tuple, int] = {}
        while True:
            out = [(arc, q) for arc, q in flow.items() if arc[0] == SRC and q > 0]
            if not out:
                break
            path, node = [], SRC
            amount = None
            while node != SNK:
                arc = min((arc for arc, q in flow.items() if arc[0] == node and q > 0), key=lambda a: _node_key(a[1]))
                amount = flow[arc] if amount is None else min(amount, flow[arc])
                path.append(arc)
                node = arc[1]
            for arc in path:
                flow[arc] -= amount
            legs = tuple(arc[1] for arc in path[:-1])
            paths[legs] = paths.get(legs, 0) + amount
        shipments.extend(CargoAssignment(oid, legs, q) for legs, q in sorted(paths.items()))
    return RecoveryPlan(strings, canceled, tuple(shipments), dropped)


def solve_arc(scn, max_delay: int | None = None, interval: int | None = None,
              times: dict[str, list[int]] | None = None, time_limit: float = 600.0) -> ArcResult:
    inst = as_instance(scn)
    net = build_copy_network(inst, max_delay, interval, times)
    p = build_arc_program(net)
    maybe_dump(p, "arc")
    sol = solve_mip(p, time_limit=time_limit)
    plan = decode_arc_solution(net, sol.primal)
    cost = plan_cost(plan, inst.scenario)
    if abs(cost.total - sol.objective) > 1e-6 * max(1.0, abs(sol.objective)):
        raise AssertionError(f"re-costed plan {cost.total} differs from MIP objective {sol.objective}")
    log.info("arc model: %d vars, %d rows, objective %.2f", p.num_vars, p.num_rows, sol.objective)
    return ArcResult(plan, cost, sol.objective, net, p.num_vars, p.num_rows, sol.status)
