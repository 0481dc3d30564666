"""JSON reading and writing for scenarios and recovery plans."""
from __future__ import annotations

import json
from pathlib import Path

from .domain import (
    AOG,
    Aircraft,
    Airport,
    AirportClosure,
    CapacityShortage,
    CargoAssignment,
    CargoOrder,
    ConnectionRule,
    CostParameters,
    Flight,
    FlightOverlap,
    Mismatch,
    RecoveryPlan,
    Scenario,
    Schedule,
)


def _money(x: float) -> float:
    return round(float(x), 2)


def scenario_to_dict(scn: Scenario) -> dict:
    s = scn.schedule
    disruptions = []
    for d in scn.disruptions:
        if isinstance(d, AOG):
            item = {"type": "AOG", "aircraft": d.aircraft, "start": d.start, "end": d.end}
            if d.airport:
                item["airport"] = d.airport
        elif isinstance(d, AirportClosure):
            item = {"type": "AirportClosure", "airport": d.airport, "start": d.start, "end": d.end}
        elif isinstance(d, Mismatch):
            item = {"type": "Mismatch", "aircraft": d.aircraft, "airport": d.airport}
        elif isinstance(d, CapacityShortage):
            item = {"type": "CapacityShortage", "flight": d.flight, "delta": d.delta}
        elif isinstance(d, FlightOverlap):
            item = {"type": "FlightOverlap", "aircraft": d.aircraft, "delay": d.delay}
        else:
            raise TypeError(d)
        disruptions.append(item)
    return {
        "name": scn.name,
        "horizon": {"start": scn.horizon[0], "end": scn.horizon[1]},
        "costs": {k: _money(v) for k, v in scn.costs.__dict__.items()},
        "rules": {
            "turn_by_fleet": dict(sorted(s.rules.turn_by_fleet.items())),
            "default_turn": s.rules.default_turn,
            "trans_time": s.rules.trans_time,
        },
        "airports": [
            {"code": a.code, "hub": a.hub, "closures": [list(c) for c in a.closures]}
            for a in sorted(s.airports.values(), key=lambda a: a.code)
        ],
        "aircraft": [
            {
                "id": a.id,
                "fleet": a.fleet,
                "capacity": a.capacity,
                "available_from": {"airport": a.available_airport, "minute": a.available_minute},
                "original_string": list(a.original_string),
            }
            for a in sorted(s.aircraft.values(), key=lambda a: a.id)
        ],
        "flights": [
            {
                "id": f.id,
                "origin": f.origin,
                "destination": f.destination,
                "sched_dep": f.sched_dep,
                "sched_arr": f.sched_arr,
                "fly_time": f.fly_time,
                "max_delay": f.max_delay,
                "cancel_cost": None if f.cancel_cost is None else _money(f.cancel_cost),
            }
            for f in sorted(s.flights.values(), key=lambda f: (f.sched_dep, f.id))
        ],
        "cargo": [
            {
                "id": o.id,
                "origin": o.origin,
                "destination": o.destination,
                "volume": o.volume,
                "due_time": o.due_time,
                "original_itinerary": list(o.original_itinerary),
                "cancel_cost_per_uld": None if o.cancel_cost_per_uld is None else _money(o.cancel_cost_per_uld),
            }
            for o in sorted(s.cargo.values(), key=lambda o: o.id)
        ],
        "disruptions": disruptions,
    }


def scenario_from_dict(data: dict) -> Scenario:
    rules_d = data.get("rules", {})
    rules = ConnectionRule(
        turn_by_fleet=dict(rules_d.get("turn_by_fleet", {})),
        default_turn=int(rules_d.get("default_turn", 80)),
        trans_time=int(rules_d.get("trans_time", 120)),
    )
    airports = {
        a["code"]: Airport(a["code"], tuple(tuple(c) for c in a.get("closures", [])), bool(a.get("hub", False)))
        for a in data["airports"]
    }
    aircraft = {
        a["id"]: Aircraft(
            a["id"], a.get("fleet", ""), int(a["capacity"]),
            a["available_from"]["airport"], int(a["available_from"]["minute"]),
            tuple(a.get("original_string", [])),
        )
        for a in data["aircraft"]
    }
    flights = {}
    for f in data["flights"]:
        fly = int(f["fly_time"]) if "fly_time" in f else int(f["sched_arr"]) - int(f["sched_dep"])
        if "sched_arr" in f and int(f["sched_arr"]) != int(f["sched_dep"]) + fly:
            raise ValueError(f"flight {f['id']}: sched_arr differs from sched_dep + fly_time")
        flights[f["id"]] = Flight(
            f["id"], f["origin"], f["destination"], int(f["sched_dep"]), fly,
            int(f.get("max_delay", 240)), f.get("cancel_cost"),
        )
    cargo = {
        o["id"]: CargoOrder(
            o["id"], o["origin"], o["destination"], int(o["volume"]), int(o["due_time"]),
            tuple(o["original_itinerary"]), o.get("cancel_cost_per_uld"),
        )
        for o in data["cargo"]
    }
    disruptions = []
    for d in data.get("disruptions", []):
        kind = d["type"]
        if kind == "AOG":
            disruptions.append(AOG(d["aircraft"], int(d["start"]), int(d["end"]), d.get("airport")))
        elif kind == "AirportClosure":
            disruptions.append(AirportClosure(d["airport"], int(d["start"]), int(d["end"])))
        elif kind == "Mismatch":
            disruptions.append(Mismatch(d["aircraft"], d["airport"]))
        elif kind == "CapacityShortage":
            disruptions.append(CapacityShortage(d["flight"], int(d["delta"])))
        elif kind == "FlightOverlap":
            disruptions.append(FlightOverlap(d["aircraft"], int(d["delay"])))
        else:
            raise ValueError(f"unknown disruption type {kind!r}")
    horizon = data.get("horizon", {"start": 0, "end": 1440})
    return Scenario(
        schedule=Schedule(airports, aircraft, flights, cargo, rules),
        disruptions=tuple(disruptions),
        horizon=(int(horizon["start"]), int(horizon["end"])),
        costs=CostParameters(**{k: float(v) for k, v in data.get("costs", {}).items()}),
        name=data.get("name", "scenario"),
    )


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def save_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(dumps(scenario_to_dict(scn)), encoding="utf-8")


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def plan_to_dict(plan: RecoveryPlan, cost: dict | None = None) -> dict:
    out = {
        "strings": {a: [list(leg) for leg in legs] for a, legs in sorted(plan.strings.items())},
        "canceled_flights": sorted(plan.canceled_flights),
        "shipments": [
            {"cargo": s.cargo, "legs": [list(leg) for leg in s.legs], "volume": s.volume}
            for s in sorted(plan.shipments, key=lambda s: (s.cargo, s.legs))
        ],
        "canceled_cargo": dict(sorted(plan.canceled_cargo.items())),
    }
    if cost is not None:
        out["cost"] = cost
    return out


def plan_from_dict(data: dict) -> RecoveryPlan:
    return RecoveryPlan(
        strings={a: tuple((f, int(t)) for f, t in legs) for a, legs in data["strings"].items()},
        canceled_flights=tuple(data["canceled_flights"]),
        shipments=tuple(
            CargoAssignment(s["cargo"], tuple((f, int(t)) for f, t in s["legs"]), int(s["volume"]))
            for s in data["shipments"]
        ),
        canceled_cargo={k: int(v) for k, v in data.get("canceled_cargo", {}).items()},
    )


def save_plan(plan: RecoveryPlan, path, cost: dict | None = None) -> None:
    Path(path).write_text(dumps(plan_to_dict(plan, cost)), encoding="utf-8")


def load_plan(path) -> RecoveryPlan:
    return plan_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
