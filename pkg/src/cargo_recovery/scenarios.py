"""Synthetic scenarios, the two-flight worked example, and an exhaustive oracle."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Mapping

from .domain import (
    AOG,
    Aircraft,
    Airport,
    AirportClosure,
    CapacityShortage,
    CargoOrder,
    ConnectionRule,
    CostParameters,
    Flight,
    FlightOverlap,
    Mismatch,
    Scenario,
    Schedule,
    validate_schedule,
)
from .instance import RecoveryInstance, compile_scenario


class GenerationFailure(Exception):
    pass


class SizeExceeded(Exception):
    pass


DISRUPTION_KINDS = ("FO", "AM", "CS", "AOG", "AC")


def worked_example() -> Scenario:
    """Two aircraft, two flights X->Y->Z and one 5-ULD order riding both.

    The order's scheduled connection at Y is only 95 minutes while the two legs
    sit on different aircraft, so it cannot transship as planned. Delaying the
    second leg by 25 minutes (cost 50) restores a standard connection.
    """
    airports = {code: Airport(code, hub=(code == "Y")) for code in "XYZ"}
    aircraft = {
        "A": Aircraft("A", "N", 15, "X", 0, ("f1",)),
        "B": Aircraft("B", "N", 15, "Y", 0, ("f2",)),
    }
    flights = {
        "f1": Flight("f1", "X", "Y", 0, 100, max_delay=50),
        "f2": Flight("f2", "Y", "Z", 195, 100, max_delay=50),
    }
    cargo = {"o1": CargoOrder("o1", "X", "Z", 5, 1000, ("f1", "f2"))}
    return Scenario(
        Schedule(airports, aircraft, flights, cargo),
        costs=CostParameters(aircraft_swap=500.0),
        horizon=(0, 600),
        name="worked-example",
    )


WORKED_EXAMPLE_GRID = (50, 25)


@dataclass(frozen=True)
class GeneratorConfig:
    n_airports: int = 6
    n_hubs: int = 2
    n_aircraft: int = 4
    n_flights: int = 16
    n_cargo: int = 8
    horizon_hours: int = 24
    capacity_range: tuple[int, int] = (8, 38)
    seed: int = 0
    disruption_weights: Mapping[str, float] = field(
        default_factory=lambda: {"FO": 1.0, "AM": 1.0, "CS": 1.0, "AOG": 1.0, "AC": 1.0}
    )
    n_disruptions: int = 2
    max_delay: int = 240
    fly_range: tuple[int, int] = (60, 180)
    slack_range: tuple[int, int] = (0, 90)
    max_volume: int = 10
    retries: int = 50

    def __post_init__(self):
        if not 0 < self.n_hubs <= self.n_airports:
            raise ValueError("need 1 <= n_hubs <= n_airports")
        lo, hi = self.capacity_range
        if not 1 <= lo <= hi:
            raise ValueError("bad capacity range")
        unknown = set(self.disruption_weights) - set(DISRUPTION_KINDS)
        if unknown:
            raise ValueError(f"unknown disruption kinds {sorted(unknown)}")


def _airport_codes(n: int) -> list[str]:
    return [f"P{k:02d}" for k in range(n)]


def _rotations(cfg: GeneratorConfig, rng: random.Random, codes, hubs, turn, horizon_end):
    """Hub-and-spoke walks, one per aircraft, dealt flights round-robin."""
    quota = [cfg.n_flights // cfg.n_aircraft + (1 if k < cfg.n_flights % cfg.n_aircraft else 0)
             for k in range(cfg.n_aircraft)]
    spokes = [c for c in codes if c not in hubs] or list(hubs)
    legs = []
    starts = []
    for k in range(cfg.n_aircraft):
        where = rng.choice(hubs) if rng.random() < 0.6 else rng.choice(spokes)
        ready = 5 * rng.randint(0, 12)
        starts.append((where, ready))
        mine = []
        for _ in range(quota[k]):
            if where in hubs:
                pool = [c for c in codes if c != where]
            else:
                pool = [h for h in hubs if h != where]
            dest = rng.choice(pool)
            dep = ready + 5 * rng.randint(cfg.slack_range[0] // 5, cfg.slack_range[1] // 5)
            fly = 5 * rng.randint(cfg.fly_range[0] // 5, cfg.fly_range[1] // 5)
            if dep + fly > horizon_end:
                break
            mine.append((where, dest, dep, fly))
            where, ready = dest, dep + fly + turn
        legs.append(mine)
    return starts, legs


def generate_scenario(cfg: GeneratorConfig) -> Scenario:
    rng = random.Random(cfg.seed)
    for _ in range(cfg.retries):
        scn = _try_generate(cfg, rng)
        if scn is not None:
            return scn
    raise GenerationFailure(f"no valid scenario after {cfg.retries} attempts (seed {cfg.seed})")


def _try_generate(cfg: GeneratorConfig, rng: random.Random) -> Scenario | None:
    codes = _airport_codes(cfg.n_airports)
    hubs = codes[: cfg.n_hubs]
    rules = ConnectionRule()
    turn = rules.default_turn
    horizon_end = cfg.horizon_hours * 60
    starts, rot = _rotations(cfg, rng, codes, hubs, turn, horizon_end)
    aircraft, flights = {}, {}
    n = 0
    raw = []
    for k, mine in enumerate(rot):
        for leg in mine:
            raw.append((leg[2], k, leg))
    raw.sort()
    ids = {}
    for dep, k, leg in raw:
        n += 1
        ids[(k, leg)] = f"F{n:03d}"
    strings = []
    for k, mine in enumerate(rot):
        s = []
        for leg in mine:
            fid = ids[(k, leg)]
            origin, dest, dep, fly = leg
            flights[fid] = Flight(fid, origin, dest, dep, fly, max_delay=cfg.max_delay)
            s.append(fid)
        strings.append(tuple(s))
    if not flights:
        return None
    lo, hi = cfg.capacity_range
    for k in range(cfg.n_aircraft):
        aid = f"AC{k + 1}"
        cap = rng.randint(lo, hi)
        fleet = "N" if cap < 20 else "W"
        aircraft[aid] = Aircraft(aid, fleet, cap, starts[k][0], starts[k][1], strings[k])
    owner = {f: a.id for a in aircraft.values() for f in a.original_string}
    nxt = {}
    for a in aircraft.values():
        for f, g in zip(a.original_string, a.original_string[1:]):
            nxt[f] = g
    load = {f: 0 for f in flights}
    cap_of = {f: aircraft[owner[f]].capacity for f in flights}
    options = []
    for f in flights.values():
        options.append((f.id,))
        if f.destination in hubs:
            for g in flights.values():
                gap = g.sched_dep - f.sched_arr
                if g.origin != f.destination or g.destination == f.origin or gap < 0:
                    continue
                if nxt.get(f.id) == g.id or gap >= rules.trans_time:
                    options.append((f.id, g.id))
    options.sort()
    cargo = {}
    for k in range(cfg.n_cargo):
        rng.shuffle(options)
        for itin in options:
            room = min(cap_of[f] - load[f] for f in itin)
            if room < 1:
                continue
            vol = rng.randint(1, min(room, cfg.max_volume))
            first, last = flights[itin[0]], flights[itin[-1]]
            due = last.sched_arr + 5 * rng.randint(0, 12)
            oid = f"O{k + 1:02d}"
            cargo[oid] = CargoOrder(oid, first.origin, last.destination, vol, due, itin)
            for f in itin:
                load[f] += vol
            break
    airports = {c: Airport(c, hub=c in hubs) for c in codes}
    sched = Schedule(airports, aircraft, flights, cargo, rules)
    if validate_schedule(sched):
        return None
    disruptions = _disruptions(cfg, rng, sched, hubs, horizon_end)
    return Scenario(sched, tuple(disruptions), (0, horizon_end), CostParameters(), name=f"gen-{cfg.seed}")


def _disruptions(cfg, rng, sched: Schedule, hubs, horizon_end):
    kinds = [k for k in DISRUPTION_KINDS if cfg.disruption_weights.get(k, 0) > 0]
    weights = [cfg.disruption_weights[k] for k in kinds]
    out = []
    used_aog, used_overlap = set(), set()
    aog_draws = []
    aircraft_ids = sorted(sched.aircraft)
    flight_ids = sorted(sched.flights)
    for _ in range(cfg.n_disruptions if kinds else 0):
        kind = rng.choices(kinds, weights)[0]
        if kind == "FO":
            aid = rng.choice(aircraft_ids)
            if aid in used_overlap:
                continue
            used_overlap.add(aid)
            out.append(FlightOverlap(aid, 5 * rng.randint(6, 24)))
        elif kind == "AM":
            aid = rng.choice(aircraft_ids)
            here = sched.aircraft[aid].available_airport
            out.append(Mismatch(aid, rng.choice([c for c in sorted(sched.airports) if c != here])))
        elif kind == "CS":
            fid = rng.choice(flight_ids)
            owner = next(a for a in sched.aircraft.values() if fid in a.original_string)
            out.append(CapacityShortage(fid, rng.randint(1, max(1, owner.capacity // 2))))
        elif kind == "AOG":
            aid = rng.choice(aircraft_ids)
            if aid in used_aog:
                continue
            used_aog.add(aid)
            aog_draws.append((aid, 5 * rng.randint(0, 24), 5 * rng.randint(12, 48)))
        else:
            code = rng.choice(sorted(sched.airports))
            start = 5 * rng.randint(0, max(0, horizon_end - 60) // 5)
            out.append(AirportClosure(code, start, start + 5 * rng.randint(6, 24)))
    # AOG is placed where the aircraft becomes available, after the other
    # disruptions have moved it, so the grounding is always reachable
    for aid, wait, length in aog_draws:
        a = sched.aircraft[aid]
        where, ready = a.available_airport, a.available_minute
        for d in out:
            if isinstance(d, Mismatch) and d.aircraft == aid:
                where = d.airport
            elif isinstance(d, FlightOverlap) and d.aircraft == aid:
                ready += d.delay
        out.append(AOG(aid, ready + wait, ready + wait + length, where))
    return out


# --- micro-instances for oracle comparisons ----------------------------------

MICRO_GRID = (90, 30)


def micro_config(seed: int) -> GeneratorConfig:
    rng = random.Random(10_000 + seed)
    return GeneratorConfig(
        n_airports=3,
        n_hubs=1,
        n_aircraft=rng.choice([2, 2, 3]),
        n_flights=rng.choice([4, 5, 6]),
        n_cargo=rng.choice([2, 3, 4]),
        horizon_hours=10,
        capacity_range=(8, 12),
        seed=seed,
        n_disruptions=rng.choice([1, 2]),
        max_delay=MICRO_GRID[0],
        fly_range=(60, 120),
        slack_range=(0, 60),
        max_volume=6,
    )


def micro_scenario(seed: int) -> Scenario:
    return generate_scenario(micro_config(seed))


def tight_turn_config(seed: int) -> GeneratorConfig:
    """Mid-sized networks with quick turnarounds, where many connections are short.

    This is the corpus the predictor experiments use: with little ground slack,
    delays keep creating new short through connections for cargo to ride.
    """
    return GeneratorConfig(n_aircraft=4, n_flights=20, n_cargo=14, n_disruptions=4, slack_range=(0, 40), seed=seed)


# --- exhaustive oracle -------------------------------------------------------------


def brute_force_oracle(scn: Scenario, max_delay: int, interval: int) -> float:
    """Optimal recovery cost by plain enumeration on the given delay grid.

    Every flight takes one grid time or is canceled, every flown copy goes to
    one aircraft, and the cargo routing over the resulting flown copies is
    enumerated per order with integer volumes.
    """
    inst = compile_scenario(scn)
    regular = inst.regular_flights()
    if len(regular) > 6 or len(inst.aircraft) > 3 or len(inst.cargo) > 4:
        raise SizeExceeded("oracle limited to 6 flights, 3 aircraft, 4 orders")
    if any(o.volume > 10 for o in inst.cargo.values()):
        raise SizeExceeded("oracle limited to 10 ULDs per order")
    times = {f: inst.grid(f, max_delay, interval) for f in inst.flight_order}
    if any(len(ts) > 4 for ts in times.values()):
        raise SizeExceeded("oracle limited to 4 grid times per flight")
    return _Oracle(inst, times).solve()


class _Oracle:
    def __init__(self, inst: RecoveryInstance, times):
        self.inst = inst
        self.times = times
        self.order = inst.flight_order
        self.aircraft = sorted(inst.aircraft)
        self.best = math.inf
        self.cargo_memo = {}

    def solve(self) -> float:
        self._walk(0, {a: None for a in self.aircraft}, [], 0.0)
        if math.isinf(self.best):
            raise SizeExceeded("no feasible recovery on this grid")
        return self.best

    def _walk(self, k, last, flown, cost):
        if cost >= self.best:
            return
        inst = self.inst
        if k == len(self.order):
            total = cost + self._cargo(tuple(flown))
            if total < self.best:
                self.best = total
            return
        fid = self.order[k]
        fl = inst.flights[fid]
        for t in self.times[fid]:
            for a in self.aircraft:
                if not inst.allowed(a, fid):
                    continue
                prev = last[a]
                if prev is None:
                    if not inst.starts_at(a, fid, t):
                        continue
                elif not inst.can_connect(prev[0], prev[1], fid, t):
                    continue
                last[a] = (fid, t)
                flown.append((fid, t, a, prev))
                self._walk(k + 1, last, flown, cost + inst.leg_cost(a, fid, t))
                flown.pop()
                last[a] = prev
        if not fl.mandatory:
            self._walk(k + 1, last, flown, cost + inst.cancel_cost(fid))

    def _cargo(self, flown) -> float:
        inst = self.inst
        copies = {(f, t): a for f, t, a, _ in flown}
        through = {(prev, (f, t)) for f, t, a, prev in flown if prev is not None}
        key = (tuple(sorted(copies.items())), tuple(sorted(through)))
        if key in self.cargo_memo:
            return self.cargo_memo[key]
        cap = {c: inst.capacity(a, c[0]) for c, a in copies.items()}
        regular = sorted((c for c in copies if not inst.flights[c[0]].mandatory), key=lambda c: inst.flights[c[0]].order)
        orders = []
        for oid, o in inst.cargo.items():
            cancel = inst.cargo_cancel_cost(oid)
            paths = []
            for path in _paths(inst, oid, regular, through):
                unit = inst.itinerary_unit_cost(oid, path)
                if unit < cancel:
                    paths.append((unit, path))
            paths.sort()
            orders.append((o.volume, cancel, paths))
        value = _allocate(orders, cap)
        self.cargo_memo[key] = value
        return value


def _paths(inst: RecoveryInstance, oid: str, copies, through):
    out = []

    def extend(path):
        f, t = path[-1]
        if inst.cargo_sink_ok(oid, f):
            out.append(tuple(path))
        if not inst.cargo_extends(oid, f):
            return
        for g, s in copies:
            if not inst.can_connect(f, t, g, s):
                continue
            if inst.is_short(f, t, g, s) and ((f, t), (g, s)) not in through:
                continue
            path.append((g, s))
            extend(path)
            path.pop()

    for c in copies:
        if inst.cargo_source_ok(oid, c[0]):
            extend([c])
    return out


def _allocate(orders, cap) -> float:
    """Cheapest integral split of every order over its paths, the rest canceled."""
    best = [math.inf]
    floor = [0.0] * (len(orders) + 1)
    for k in range(len(orders) - 1, -1, -1):
        vol, cancel, paths = orders[k]
        cheapest = min([cancel] + [u for u, _ in paths])
        floor[k] = floor[k + 1] + vol * cheapest
    left = dict(cap)

    def order_step(k, cost):
        if cost + floor[k] >= best[0]:
            return
        if k == len(orders):
            best[0] = cost
            return
        vol, cancel, paths = orders[k]
        path_step(k, 0, vol, cost)

    def path_step(k, p, remaining, cost):
        vol, cancel, paths = orders[k]
        rest_floor = floor[k + 1]
        if p == len(paths):
            order_step(k + 1, cost + remaining * cancel)
            return
        unit, path = paths[p]
        cheapest_rest = min([cancel] + [u for u, _ in paths[p:]])
        if cost + remaining * cheapest_rest + rest_floor >= best[0]:
            return
        most = min([remaining] + [left[c] for c in path])
        for q in range(most, -1, -1):
            for c in path:
                left[c] -= q
            path_step(k, p + 1, remaining - q, cost + q * unit)
            for c in path:
                left[c] += q

    order_step(0, 0.0)
    return best[0]
