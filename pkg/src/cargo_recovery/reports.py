"""CSV reports for one or more recovery runs on the same scenario.

Three tables are written: recovery policy counts, the cost split, and a
solver comparison (LP, IP, gap, generated columns and rows). Wall-clock time
is left out unless asked for, so that repeated runs give identical files.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .domain import RecoveryPlan, Scenario, plan_cost, plan_policy
from .master import integrality_gap

POLICY_FIELDS = (
    "method", "flight_cancel", "aircraft_swap", "flight_delay_minutes",
    "cargo_cancel_ulds", "flight_change_ulds", "cargo_delay_uld_minutes",
)
COST_FIELDS = (
    "method", "flight_cancel", "aircraft_swap", "flight_delay",
    "cargo_cancel", "flight_change", "cargo_delay", "total",
)
COMPARISON_FIELDS = (
    "method", "lp_objective", "ip_objective", "gap_percent", "iterations",
    "strings", "itineraries", "cap_rows", "sc_rows", "vi_rows",
)


@dataclass
class RunSummary:
    """What the reports need from a run, whichever solver produced it."""

    method: str
    plan: RecoveryPlan
    ip_objective: float
    lp_objective: float | None = None
    iterations: int | None = None
    strings: int | None = None
    itineraries: int | None = None
    cap_rows: int | None = None
    sc_rows: int | None = None
    vi_rows: int | None = None
    seconds: float | None = None

    @property
    def gap(self) -> float | None:
        if self.lp_objective is None:
            return None
        return integrality_gap(self.lp_objective, self.ip_objective)


def summarize(method: str, result, seconds: float | None = None) -> RunSummary:
    """Wrap a CRG, arc-model or sequential result."""
    if hasattr(result, "lp_objective"):
        return RunSummary(
            method, result.plan, result.ip_objective, result.lp_objective, result.iterations,
            result.n_strings, result.n_itineraries, result.n_cap_rows, result.n_sc_rows,
            result.n_vi_rows, seconds,
        )
    if hasattr(result, "flight_objective"):
        return RunSummary(method, result.plan, result.cost.total, seconds=seconds)
    return RunSummary(method, result.plan, result.objective, seconds=seconds)


def _num(v, digits: int = 2) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    v = round(float(v), digits)
    return f"{v + 0.0:.{digits}f}"


def policy_rows(runs: Sequence[RunSummary], scn: Scenario) -> list[dict]:
    out = []
    for r in runs:
        counts = plan_policy(r.plan, scn)
        out.append({"method": r.method, **{k: str(v) for k, v in counts.__dict__.items()}})
    return out


def cost_rows(runs: Sequence[RunSummary], scn: Scenario) -> list[dict]:
    out = []
    for r in runs:
        parts = plan_cost(r.plan, scn).as_dict()
        out.append({"method": r.method, **{k: _num(v) for k, v in parts.items()}})
    return out


def comparison_rows(runs: Sequence[RunSummary], with_time: bool = False) -> list[dict]:
    out = []
    for r in runs:
        gap = r.gap
        row = {
            "method": r.method,
            "lp_objective": _num(r.lp_objective, 4),
            "ip_objective": _num(r.ip_objective),
            "gap_percent": "" if gap is None else _num(100.0 * gap, 4),
            "iterations": _num(r.iterations),
            "strings": _num(r.strings),
            "itineraries": _num(r.itineraries),
            "cap_rows": _num(r.cap_rows),
            "sc_rows": _num(r.sc_rows),
            "vi_rows": _num(r.vi_rows),
        }
        if with_time:
            row["seconds"] = _num(r.seconds, 3)
        out.append(row)
    return out


def _write(path: Path, fields: Sequence[str], rows: Sequence[dict]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def emit_reports(runs: Sequence[RunSummary], scn: Scenario, out_dir, with_time: bool = False) -> dict[str, Path]:
    """Write ``policy_details.csv``, ``cost_breakdown.csv`` and ``comparison.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comparison_fields = COMPARISON_FIELDS + (("seconds",) if with_time else ())
    return {
        "policy": _write(out / "policy_details.csv", POLICY_FIELDS, policy_rows(runs, scn)),
        "cost": _write(out / "cost_breakdown.csv", COST_FIELDS, cost_rows(runs, scn)),
        "comparison": _write(out / "comparison.csv", comparison_fields, comparison_rows(runs, with_time)),
    }
