"""Departure times discovered so far, shared by aircraft and cargo pricing."""
from __future__ import annotations

import bisect
import logging

from .instance import RecoveryInstance

log = logging.getLogger(__name__)


class TimeRegistry:
    """Per-flight sorted departure times plus the short connections seen in columns.

    A frozen registry never grows: pricing then picks departures only from the
    given grid, which is how the string model is matched against a fixed copy
    network. A strict registry is frozen and also leaves out scheduled times
    that are not in the grid, for a timetable that is already decided.
    """

    def __init__(self, inst: RecoveryInstance, cap: int = 64, grid: dict[str, list[int]] | None = None,
                 strict: bool = False):
        self.inst = inst
        self.cap = cap
        self.frozen = grid is not None
        self.strict = strict and self.frozen
        self.times: dict[str, list[int]] = {}
        for fid, f in inst.flights.items():
            base = set(grid.get(fid, [])) if grid is not None else set()
            if not self.strict:
                base.add(f.sched_dep)
            self.times[fid] = sorted(base)
        self.short: set[tuple[str, int, str, int]] = set()
        self._warned: set[str] = set()

    def candidates(self, fid: str) -> list[int]:
        return self.times[fid]

    def has(self, fid: str, t: int) -> bool:
        ts = self.times[fid]
        k = bisect.bisect_left(ts, t)
        return k < len(ts) and ts[k] == t

    def add_time(self, fid: str, t: int) -> bool:
        if self.frozen or self.has(fid, t):
            return False
        ts = self.times[fid]
        if len(ts) >= self.cap:
            if fid not in self._warned:
                log.warning("departure-time set of %s reached its cap of %d", fid, self.cap)
                self._warned.add(fid)
            return False
        bisect.insort(ts, t)
        return True

    def add_short(self, sc: tuple[str, int, str, int]) -> bool:
        if sc in self.short:
            return False
        self.short.add(sc)
        return True

    def snapshot(self) -> dict[str, list[int]]:
        return {f: list(ts) for f, ts in self.times.items()}
