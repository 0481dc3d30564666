"""Small LP/MIP solver: bounded revised simplex plus best-first branch and bound.

Dual values follow the minimisation convention: ``<=`` rows have duals <= 0,
``>=`` rows have duals >= 0 and equality rows are free. Setting
``CARGO_RECOVERY_LP_BACKEND=highs`` routes solves through scipy's HiGHS
instead, which the tests also use as an independent cross-check.
"""
from __future__ import annotations

import heapq
import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np

from . import kernels
from .kernels import AT_LOWER, AT_UPPER, BASIC, FIXED, FLIP, FREE, UNBOUNDED

FEAS_TOL = 1e-7
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-7
INT_TOL = 1e-6
BLAND_AFTER = 1000
PERTURB_AFTER = 50
PERTURB_SIZE = 1e-6
REFACTOR_EVERY = 50
DIVE_EVERY = 100

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED_STATUS = "Unbounded"
TIME_LIMIT = "TimeLimit"

SENSES = ("<=", ">=", "=")


class SolverError(Exception):
    pass


class NumericalFailure(SolverError):
    pass


class DuplicateId(SolverError):
    pass


class Infeasible(SolverError):
    pass


class TimeLimitWithoutIncumbent(SolverError):
    pass


@dataclass
class LpSolution:
    status: str
    objective: float = math.nan
    primal: dict = field(default_factory=dict)
    duals: dict = field(default_factory=dict)
    iterations: int = 0
    nodes: int = 0
    bound: float = math.nan

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class LinearProgram:
    """Variables and constraints keyed by arbitrary hashable ids.

    Coefficients are stored per column, so rows and columns can both be appended
    after a solve; the last optimal basis is kept as a warm-start hint.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.var_ids: list = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.cost: list[float] = []
        self.integer: list[bool] = []
        self.priority: list[int] = []
        self._columns: list[dict[int, float]] = []
        self._var_pos: dict = {}
        self.row_ids: list = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self._row_pos: dict = {}
        self.basis_hint: tuple | None = None
        self._dense: np.ndarray | None = None

    @property
    def num_vars(self) -> int:
        return len(self.var_ids)

    @property
    def num_rows(self) -> int:
        return len(self.row_ids)

    def has_var(self, vid: Hashable) -> bool:
        return vid in self._var_pos

    def has_row(self, rid: Hashable) -> bool:
        return rid in self._row_pos

    def var_index(self, vid: Hashable) -> int:
        return self._var_pos[vid]

    def row_index(self, rid: Hashable) -> int:
        return self._row_pos[rid]

    def add_variable(self, vid, lower=0.0, upper=math.inf, cost=0.0, integer=False, column: Mapping | None = None,
                     priority: int = 0) -> int:
        """Append a column; branch and bound branches on higher ``priority`` variables first."""
        if vid in self._var_pos:
            raise DuplicateId(f"variable {vid!r} already exists")
        if lower > upper:
            raise ValueError(f"variable {vid!r} has lower bound above upper bound")
        j = len(self.var_ids)
        self._var_pos[vid] = j
        self.var_ids.append(vid)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.cost.append(float(cost))
        self.integer.append(bool(integer))
        self.priority.append(int(priority))
        entries: dict[int, float] = {}
        for rid, coef in (column or {}).items():
            if coef:
                entries[self._row_pos[rid]] = float(coef)
        self._columns.append(entries)
        self._dense = None
        return j

    def add_constraint(self, rid, sense: str, rhs: float, row: Mapping | None = None) -> int:
        if rid in self._row_pos:
            raise DuplicateId(f"constraint {rid!r} already exists")
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        i = len(self.row_ids)
        self._row_pos[rid] = i
        self.row_ids.append(rid)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        for vid, coef in (row or {}).items():
            if coef:
                self._columns[self._var_pos[vid]][i] = float(coef)
        self._dense = None
        return i

    def add_rows(self, rows: Iterable[tuple]) -> "LinearProgram":
        """Append ``(id, sense, rhs, {var: coef})`` rows; the basis hint stays usable."""
        for rid, sense, rhs, row in rows:
            self.add_constraint(rid, sense, rhs, row)
        return self

    def add_columns(self, cols: Iterable[tuple]) -> "LinearProgram":
        """Append ``(id, lower, upper, cost, integer, {row: coef})`` columns."""
        for vid, lower, upper, cost, integer, column in cols:
            self.add_variable(vid, lower, upper, cost, integer, column)
        return self

    def set_coefficient(self, rid, vid, value: float) -> None:
        i, j = self._row_pos[rid], self._var_pos[vid]
        if value:
            self._columns[j][i] = float(value)
        else:
            self._columns[j].pop(i, None)
        self._dense = None

    def coefficient(self, rid, vid) -> float:
        return self._columns[self._var_pos[vid]].get(self._row_pos[rid], 0.0)

    def column(self, vid) -> dict:
        return {self.row_ids[i]: v for i, v in self._columns[self._var_pos[vid]].items()}

    def set_bounds(self, vid, lower: float, upper: float) -> None:
        j = self._var_pos[vid]
        self.lower[j] = float(lower)
        self.upper[j] = float(upper)

    def matrix(self) -> np.ndarray:
        if self._dense is None or self._dense.shape != (self.num_rows, self.num_vars):
            dense = np.zeros((self.num_rows, self.num_vars))
            for j, entries in enumerate(self._columns):
                for i, v in entries.items():
                    dense[i, j] = v
            self._dense = dense
        return self._dense

    def arrays(self):
        return (
            self.matrix(),
            np.array(self.rhs, dtype=float),
            list(self.senses),
            np.array(self.cost, dtype=float),
            np.array(self.lower, dtype=float),
            np.array(self.upper, dtype=float),
        )

    def row_activity(self, primal: Mapping) -> dict:
        x = np.array([primal.get(v, 0.0) for v in self.var_ids])
        act = self.matrix() @ x if self.num_vars else np.zeros(self.num_rows)
        return dict(zip(self.row_ids, act))


# ------------------------------------------------------------------ simplex


class _Simplex:
    def __init__(self, A, b, senses, c, lb, ub):
        self.m, self.n = A.shape
        m = self.m
        slack_lb = np.array([0.0 if s == "<=" else (-np.inf if s == ">=" else 0.0) for s in senses])
        slack_ub = np.array([np.inf if s == "<=" else 0.0 for s in senses])
        self.A = np.hstack([A, np.eye(m)]) if m else A.copy()
        self.b = b
        self.c = np.concatenate([c, np.zeros(m)])
        self.lb = np.concatenate([lb, slack_lb])
        self.ub = np.concatenate([ub, slack_ub])
        self.n_real = self.n + m
        self.kern = kernels.active()
        self.iterations = 0
        self._saved_bounds = None
        # reduced costs carry rounding noise proportional to the cost scale
        self.dual_tol = max(DUAL_TOL, 1e-11 * float(np.abs(c).max(initial=0.0)))

    # nonbasic starting values
    def _nonbasic_state(self, j, at_upper=False):
        lo, hi = self.lb[j], self.ub[j]
        if lo == hi:
            return FIXED, lo
        if at_upper and np.isfinite(hi):
            return AT_UPPER, hi
        if np.isfinite(lo):
            return AT_LOWER, lo
        if np.isfinite(hi):
            return AT_UPPER, hi
        return FREE, 0.0

    def _init_nonbasic(self, upper_set=frozenset()):
        total = self.A.shape[1]
        self.state = np.empty(total, dtype=np.int64)
        self.x = np.zeros(total)
        for j in range(total):
            self.state[j], self.x[j] = self._nonbasic_state(j, j in upper_set)

    def cold_start(self):
        m = self.m
        self._init_nonbasic()
        resid = self.b - self.A[:, : self.n] @ self.x[: self.n]
        basis = []
        art_cols = []
        for i in range(m):
            s = self.n + i
            if self.lb[s] - FEAS_TOL <= resid[i] <= self.ub[s] + FEAS_TOL:
                basis.append(s)
            else:
                sign = 1.0 if resid[i] > 0 else -1.0
                col = np.zeros(m)
                col[i] = sign
                art_cols.append(col)
                basis.append(self.n_real + len(art_cols) - 1)
        n_art = len(art_cols)
        if n_art:
            self.A = np.hstack([self.A, np.array(art_cols).T])
            self.c = np.concatenate([self.c, np.zeros(n_art)])
            self.lb = np.concatenate([self.lb, np.zeros(n_art)])
            self.ub = np.concatenate([self.ub, np.full(n_art, np.inf)])
            self.state = np.concatenate([self.state, np.zeros(n_art, dtype=np.int64)])
            self.x = np.concatenate([self.x, np.zeros(n_art)])
        self.basis = np.array(basis, dtype=np.int64)
        self.state[self.basis] = BASIC
        self.x[self.basis] = 0.0
        self._refactor()
        if n_art:
            phase1 = np.zeros(self.A.shape[1])
            phase1[self.n_real :] = 1.0
            status = self._run(phase1)
            if status != OPTIMAL:
                raise NumericalFailure("phase one did not converge")
            infeas = sum(self.xb[k] for k, j in enumerate(self.basis) if j >= self.n_real)
            if infeas > FEAS_TOL * max(1.0, float(np.abs(self.b).max(initial=0.0))):
                return INFEASIBLE
            self.ub[self.n_real :] = 0.0
            for j in range(self.n_real, self.A.shape[1]):
                if self.state[j] != BASIC:
                    self.state[j] = FIXED
                    self.x[j] = 0.0
        return OPTIMAL

    def load_basis(self, basis, upper_set) -> bool:
        """Install ``basis`` with every other column at a bound; False if it is unusable."""
        if len(basis) != self.m or len(set(basis)) != self.m:
            return False
        self._init_nonbasic(upper_set)
        self.basis = np.array(basis, dtype=np.int64)
        self.state[self.basis] = BASIC
        self.x[self.basis] = 0.0
        if self.m:
            try:
                self._refactor()
            except NumericalFailure:
                return False
            if not np.all(np.isfinite(self.binv)) or np.abs(self.binv).max() > 1e10:
                return False
            scale = 1e9 * max(1.0, float(np.abs(self.b).max(initial=0.0)))
            if not np.all(np.isfinite(self.xb)) or np.abs(self.xb).max() > scale:
                return False
        else:
            self._refactor()
        return True

    def primal_feasible(self) -> bool:
        lo, hi = self.lb[self.basis], self.ub[self.basis]
        return bool(np.all(self.xb >= lo - FEAS_TOL) and np.all(self.xb <= hi + FEAS_TOL))

    def dual_feasible(self) -> bool:
        d = self._reduced_costs(self.c)
        s = self.state
        tol = self.dual_tol
        bad = ((s == AT_LOWER) & (d < -tol)) | ((s == AT_UPPER) & (d > tol)) | (
            (s == FREE) & (np.abs(d) > tol)
        )
        return not bool(bad.any())

    def warm_start(self, basis, upper_set) -> bool:
        return self.load_basis(basis, upper_set) and self.primal_feasible()

    def _reduced_costs(self, cost):
        if not self.m:
            return cost.copy()
        y = cost[self.basis] @ self.binv
        d = cost - y @ self.A
        d[self.basis] = 0.0
        return d

    def _pivot(self, r, q, alpha, step, leave_state):
        leave = self.basis[r]
        entering_value = self.x[q] + step
        if self.m:
            self.xb -= step * alpha
        self.x[leave] = self.lb[leave] if leave_state == AT_LOWER else self.ub[leave]
        self.state[leave] = FIXED if self.lb[leave] == self.ub[leave] else leave_state
        self.basis[r] = q
        self.state[q] = BASIC
        self.x[q] = 0.0
        self.xb[r] = entering_value
        row = self.binv[r] / alpha[r]
        self.binv -= np.outer(alpha, row)
        self.binv[r] = row

    def dual_iterate(self, max_iter=None, cost=None):
        """Dual simplex from a dual feasible basis; restores primal feasibility."""
        cost = self.c if cost is None else cost
        if max_iter is None:
            max_iter = 20 * (self.A.shape[1] + self.m) + 1000
        since = 0
        for _ in range(max_iter):
            if not self.m:
                return OPTIMAL
            self.iterations += 1
            lo, hi = self.lb[self.basis], self.ub[self.basis]
            below = lo - self.xb
            above = self.xb - hi
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= FEAS_TOL:
                return OPTIMAL
            to_lower = below[r] > 0
            d = self._reduced_costs(cost)
            row = self.binv[r] @ self.A
            s = self.state
            sign = -1.0 if to_lower else 1.0
            cand = ((s == AT_LOWER) & (sign * row > PIVOT_TOL)) | ((s == AT_UPPER) & (sign * row < -PIVOT_TOL)) | (
                (s == FREE) & (np.abs(row) > PIVOT_TOL)
            )
            if not cand.any():
                return INFEASIBLE
            idx = np.flatnonzero(cand)
            ratios = np.abs(d[idx]) / np.abs(row[idx])
            ties = idx[ratios <= ratios.min() + 1e-12]
            q = int(ties[np.argmax(np.abs(row[ties]))])
            alpha = self.binv @ self.A[:, q]
            if not abs(alpha[r]) > PIVOT_TOL:
                raise NumericalFailure("dual simplex pivot vanished")
            target = lo[r] if to_lower else hi[r]
            step = (self.xb[r] - target) / alpha[r]
            self._pivot(r, q, alpha, step, AT_LOWER if to_lower else AT_UPPER)
            since += 1
            if since >= REFACTOR_EVERY:
                self._refactor()
                since = 0
        raise NumericalFailure("dual simplex iteration cap reached")

    def _perturb(self):
        """Widen bounds a little so degenerate vertices stop stalling the primal.

        Only bounds a column does not currently sit on move, so nonbasic values
        stay exact; ``_unperturb`` puts everything back.
        """
        self._saved_bounds = (self.lb.copy(), self.ub.copy())
        total = self.A.shape[1]
        rng = np.random.default_rng(total)
        lo_mag = np.where(np.isfinite(self.lb), np.abs(self.lb), 0.0)
        hi_mag = np.where(np.isfinite(self.ub), np.abs(self.ub), 0.0)
        shift = PERTURB_SIZE * (1.0 + rng.random(total))
        basic = self.state == BASIC
        move_lo = np.isfinite(self.lb) & (basic | (self.state == AT_UPPER))
        move_hi = np.isfinite(self.ub) & (basic | (self.state == AT_LOWER))
        self.lb[move_lo] -= (shift * np.maximum(1.0, lo_mag))[move_lo]
        self.ub[move_hi] += (shift * np.maximum(1.0, hi_mag))[move_hi]

    def _unperturb(self):
        self.lb, self.ub = self._saved_bounds
        self._saved_bounds = None
        for j in np.flatnonzero(self.state != BASIC):
            if self.lb[j] == self.ub[j]:
                self.state[j], self.x[j] = FIXED, self.lb[j]
            elif self.state[j] == AT_LOWER:
                self.x[j] = self.lb[j]
            elif self.state[j] == AT_UPPER:
                self.x[j] = self.ub[j]
        self._refactor()

    def _run(self, cost):
        """Primal simplex on ``cost``; if it had to perturb, restore and clean up."""
        status = self._iterate(cost)
        if self._saved_bounds is None:
            return status
        self._unperturb()
        if status != OPTIMAL:
            return self._iterate(cost, perturb=False)
        if self.dual_iterate(cost=cost) == INFEASIBLE:
            return INFEASIBLE
        return self._iterate(cost, perturb=False)

    def _refactor(self):
        if self.m == 0:
            self.binv = np.zeros((0, 0))
            self.xb = np.zeros(0)
            return
        try:
            self.binv = np.linalg.inv(self.A[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc
        nb = self.x.copy()
        nb[self.basis] = 0.0
        self.xb = self.binv @ (self.b - self.A @ nb)

    def _iterate(self, cost, max_iter=None, perturb=True):
        m = self.m
        kern = self.kern
        if max_iter is None:
            max_iter = 100 * (self.A.shape[1] + m) + 1000
        degenerate = 0
        since = 0
        for _ in range(max_iter):
            self.iterations += 1
            d = self._reduced_costs(cost)
            bland = degenerate >= BLAND_AFTER
            q = kern.entering(d, self.state, self.dual_tol, bland)
            if q < 0:
                return OPTIMAL
            alpha = self.binv @ self.A[:, q] if m else np.zeros(0)
            sq = self.state[q]
            direction = 1.0 if (sq == AT_LOWER or (sq == FREE and d[q] < 0)) else -1.0
            flip = self.ub[q] - self.lb[q]
            if not np.isfinite(flip):
                flip = np.inf
            theta, r = kern.ratio(
                alpha, self.xb, self.lb[self.basis], self.ub[self.basis], self.basis,
                direction, flip, PIVOT_TOL, bland, FEAS_TOL,
            )
            if r == UNBOUNDED:
                return UNBOUNDED_STATUS
            step = theta * direction
            if r == FLIP:
                if m:
                    self.xb -= step * alpha
                if self.state[q] == AT_LOWER:
                    self.state[q], self.x[q] = AT_UPPER, self.ub[q]
                else:
                    self.state[q], self.x[q] = AT_LOWER, self.lb[q]
            else:
                leave_state = AT_LOWER if direction * alpha[r] > 0 else AT_UPPER
                self._pivot(r, q, alpha, step, leave_state)
                since += 1
                if since >= REFACTOR_EVERY:
                    self._refactor()
                    since = 0
            degenerate = degenerate + 1 if theta <= 1e-9 else 0
            if perturb and degenerate >= PERTURB_AFTER and self._saved_bounds is None:
                self._perturb()
                perturb = False
                degenerate = 0
        raise NumericalFailure("simplex iteration cap reached")

    def optimise(self):
        status = self._run(self.c)
        if status != OPTIMAL:
            return status
        self._refactor()
        # a refactor can expose small residual infeasibility; polish once more
        status = self._iterate(self.c, perturb=False)
        if status == OPTIMAL:
            self._refactor()
        return status

    def primal(self):
        x = self.x.copy()
        x[self.basis] = self.xb
        return x[: self.n]

    def duals(self):
        if self.m == 0:
            return np.zeros(0)
        return self.c[self.basis] @ self.binv


def _solve_arrays(A, b, senses, c, lb, ub, hint=None):
    """Solve from ``hint`` when it is primal or dual feasible, else from scratch."""
    if hint is not None:
        basis, upper_set = hint
        sx = _Simplex(A, b, senses, c, lb, ub)
        if sx.load_basis(basis, upper_set):
            try:
                if sx.primal_feasible():
                    return sx.optimise(), sx
                if sx.dual_feasible():
                    status = sx.dual_iterate()
                    if status == INFEASIBLE:
                        return INFEASIBLE, sx
                    return sx.optimise(), sx
            except NumericalFailure:
                pass
    sx = _Simplex(A, b, senses, c, lb, ub)
    if sx.cold_start() == INFEASIBLE:
        return INFEASIBLE, None
    return sx.optimise(), sx


def _hint_from(p: LinearProgram, sx: _Simplex):
    names = []
    for j in sx.basis:
        if j < sx.n:
            names.append(("v", p.var_ids[j]))
        elif j < sx.n_real:
            names.append(("r", p.row_ids[j - sx.n]))
        else:
            names.append(None)
    upper = frozenset(p.var_ids[j] for j in range(sx.n) if sx.state[j] == AT_UPPER)
    return tuple(names), upper, p.num_rows


def _hint_to(p: LinearProgram, hint):
    if hint is None:
        return None
    names, upper, rows_then = hint
    basis = []
    for name in names:
        if name is None:
            return None
        kind, key = name
        if kind == "v":
            if key not in p._var_pos:
                return None
            basis.append(p._var_pos[key])
        else:
            if key not in p._row_pos:
                return None
            basis.append(p.num_vars + p._row_pos[key])
    basis.extend(p.num_vars + i for i in range(rows_then, p.num_rows))
    upper_idx = frozenset(p._var_pos[v] for v in upper if v in p._var_pos)
    return basis, upper_idx


def backend() -> str:
    return os.environ.get("CARGO_RECOVERY_LP_BACKEND", "simplex").strip().lower()


def solve_lp(p: LinearProgram, warm: bool = True) -> LpSolution:
    """Solve the continuous relaxation of ``p`` (integrality flags ignored)."""
    if backend() == "highs":
        return _solve_lp_highs(p)
    A, b, senses, c, lb, ub = p.arrays()
    hint = _hint_to(p, p.basis_hint) if warm else None
    status, sx = _solve_arrays(A, b, senses, c, lb, ub, hint)
    if status != OPTIMAL:
        return LpSolution(status=status, iterations=sx.iterations if sx else 0)
    x = sx.primal()
    y = sx.duals()
    p.basis_hint = _hint_from(p, sx)
    return LpSolution(
        status=OPTIMAL,
        objective=float(c @ x),
        primal=dict(zip(p.var_ids, x.tolist())),
        duals=dict(zip(p.row_ids, y.tolist())),
        iterations=sx.iterations,
    )


def dual_objective(p: LinearProgram, sol: LpSolution) -> float:
    """Dual bound b·y plus the bound terms of the reduced costs."""
    A, b, _, c, lb, ub = p.arrays()
    y = np.array([sol.duals[r] for r in p.row_ids])
    d = c - y @ A if p.num_rows else c
    total = float(b @ y) if p.num_rows else 0.0
    for j, vid in enumerate(p.var_ids):
        if d[j] > 1e-12:
            total += d[j] * (lb[j] if np.isfinite(lb[j]) else sol.primal[vid])
        elif d[j] < -1e-12:
            total += d[j] * (ub[j] if np.isfinite(ub[j]) else sol.primal[vid])
    return total


# ------------------------------------------------------------------ branch and bound


def _most_fractional(x, int_idx):
    best, best_dist = -1, 2.0
    for j in int_idx:
        frac = x[j] - math.floor(x[j])
        if min(frac, 1.0 - frac) <= INT_TOL:
            continue
        dist = abs(frac - 0.5)
        if dist < best_dist - 1e-12:
            best, best_dist = j, dist
    return best


def _branch_variable(x, tiers, rule):
    """First fractional variable chosen by ``rule`` in the highest priority tier that has one."""
    for tier in tiers:
        j = rule(x, tier)
        if j >= 0:
            return j
    return -1


def _dive_candidate(x, int_idx):
    """The fractional variable nearest to rounding up, for diving."""
    best, best_frac = -1, -1.0
    for j in int_idx:
        frac = x[j] - math.floor(x[j])
        if min(frac, 1.0 - frac) <= INT_TOL:
            continue
        if frac > best_frac + 1e-12:
            best, best_frac = j, frac
    return best


def solve_mip(p: LinearProgram, gap: float = 1e-6, time_limit: float = 60.0, node_limit: int = 200_000) -> LpSolution:
    """Branch and bound on the variables flagged integer: a depth-first dive, then best first."""
    if backend() == "highs":
        return _solve_mip_highs(p, gap, time_limit)
    int_idx = [j for j, flag in enumerate(p.integer) if flag]
    levels = sorted({p.priority[j] for j in int_idx}, reverse=True)
    tiers = [[j for j in int_idx if p.priority[j] == lvl] for lvl in levels]
    if not int_idx:
        sol = solve_lp(p)
        if sol.status == INFEASIBLE:
            raise Infeasible(p.name)
        sol.bound = sol.objective
        return sol
    A, b, senses, c, lb0, ub0 = p.arrays()
    lb0 = lb0.copy()
    ub0 = ub0.copy()
    for j in int_idx:
        lb0[j] = math.ceil(lb0[j] - INT_TOL) if np.isfinite(lb0[j]) else lb0[j]
        ub0[j] = math.floor(ub0[j] + INT_TOL) if np.isfinite(ub0[j]) else ub0[j]
    start = time.perf_counter()
    root_hint = _hint_to(p, p.basis_hint)
    incumbent_x, incumbent = None, math.inf
    # Best first on the parent bound, interleaved with dives: until an
    # incumbent exists, and every DIVE_EVERY nodes after, the up child of the
    # variable nearest to rounding up is solved next while its sibling waits.
    heap = [(-math.inf, 0, (), root_hint)]
    pending = None
    since_dive = DIVE_EVERY
    seq = 1
    nodes = 0
    iterations = 0
    timed_out = False

    def cutoff(value):
        return incumbent < math.inf and value >= incumbent - gap * max(1.0, abs(incumbent))

    while heap or pending is not None:
        if pending is not None:
            entry, pending, in_dive = pending, None, True
            if cutoff(entry[0]):
                since_dive = 0
                continue
        else:
            entry = heapq.heappop(heap)
            if cutoff(entry[0]):
                heapq.heappush(heap, entry)
                break
            in_dive = incumbent == math.inf or since_dive >= DIVE_EVERY
        if nodes >= node_limit or time.perf_counter() - start > time_limit:
            timed_out = True
            heapq.heappush(heap, entry)
            break
        _, _, changes, hint = entry
        lb, ub = lb0.copy(), ub0.copy()
        for j, lo, hi in changes:
            lb[j], ub[j] = lo, hi
        nodes += 1
        if not in_dive:
            since_dive += 1
        status, sx = _solve_arrays(A, b, senses, c, lb, ub, hint)
        if sx is not None:
            iterations += sx.iterations
        if status != OPTIMAL:
            if status == UNBOUNDED_STATUS and nodes == 1:
                return LpSolution(status=UNBOUNDED_STATUS, iterations=iterations, nodes=nodes)
            if in_dive:
                since_dive = 0
            continue
        x = sx.primal()
        obj = float(c @ x)
        if cutoff(obj):
            if in_dive:
                since_dive = 0
            continue
        j = _branch_variable(x, tiers, _dive_candidate if in_dive else _most_fractional)
        if j < 0:
            incumbent, incumbent_x = obj, x
            since_dive = 0
            continue
        node_hint = None
        if np.all(sx.basis < sx.n_real):
            node_hint = (list(sx.basis), frozenset(k for k in range(sx.n) if sx.state[k] == AT_UPPER))
        rest = tuple(ch for ch in changes if ch[0] != j)
        down = (obj, seq, rest + ((j, lb[j], math.floor(x[j])),), node_hint)
        up = (obj, seq + 1, rest + ((j, math.ceil(x[j]), ub[j]),), node_hint)
        seq += 2
        heapq.heappush(heap, down)
        if in_dive:
            pending = up
        else:
            heapq.heappush(heap, up)
    if incumbent_x is None:
        if timed_out:
            raise TimeLimitWithoutIncumbent(p.name)
        raise Infeasible(p.name)
    x = incumbent_x.copy()
    for j in int_idx:
        x[j] = float(round(x[j]))
    objective = float(c @ x)
    best_bound = min([objective] + [h[0] for h in heap])
    return LpSolution(
        status=TIME_LIMIT if timed_out else OPTIMAL,
        objective=objective,
        primal=dict(zip(p.var_ids, x.tolist())),
        iterations=iterations,
        nodes=nodes,
        bound=best_bound,
    )


# ------------------------------------------------------------------ HiGHS hook


def _highs_matrices(p: LinearProgram):
    A, b, senses, c, lb, ub = p.arrays()
    le = [i for i, s in enumerate(senses) if s == "<="]
    ge = [i for i, s in enumerate(senses) if s == ">="]
    eq = [i for i, s in enumerate(senses) if s == "="]
    A_ub = np.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.concatenate([b[le], -b[ge]]) if le or ge else None
    A_eq = A[eq] if eq else None
    b_eq = b[eq] if eq else None
    bounds = list(zip([None if not np.isfinite(v) else v for v in lb], [None if not np.isfinite(v) else v for v in ub]))
    return A, b, c, lb, ub, le, ge, eq, A_ub, b_ub, A_eq, b_eq, bounds


def _solve_lp_highs(p: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    A, b, c, lb, ub, le, ge, eq, A_ub, b_ub, A_eq, b_eq, bounds = _highs_matrices(p)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution(status=INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=UNBOUNDED_STATUS)
    if res.status != 0:
        raise NumericalFailure(res.message)
    y = np.zeros(p.num_rows)
    if le or ge:
        marg = res.ineqlin.marginals
        y[le] = marg[: len(le)]
        y[ge] = -marg[len(le):]
    if eq:
        y[eq] = res.eqlin.marginals
    return LpSolution(
        status=OPTIMAL,
        objective=float(res.fun),
        primal=dict(zip(p.var_ids, res.x.tolist())),
        duals=dict(zip(p.row_ids, y.tolist())),
        iterations=int(getattr(res, "nit", 0)),
    )


def _solve_mip_highs(p: LinearProgram, gap: float, time_limit: float) -> LpSolution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    A, b, senses, c, lb, ub = p.arrays()
    lo = np.where(np.array(senses) == "<=", -np.inf, b)
    hi = np.where(np.array(senses) == ">=", np.inf, b)
    constraints = [LinearConstraint(A, lo, hi)] if p.num_rows else []
    res = milp(
        c, constraints=constraints, integrality=np.array(p.integer, dtype=int), bounds=Bounds(lb, ub),
        options={"mip_rel_gap": gap, "time_limit": time_limit},
    )
    if res.x is None:
        if res.status == 1:
            raise TimeLimitWithoutIncumbent(p.name)
        raise Infeasible(p.name)
    x = res.x.copy()
    for j, flag in enumerate(p.integer):
        if flag:
            x[j] = float(round(x[j]))
    return LpSolution(
        status=OPTIMAL if res.status == 0 else TIME_LIMIT,
        objective=float(c @ x),
        primal=dict(zip(p.var_ids, x.tolist())),
        bound=float(getattr(res, "mip_dual_bound", c @ x)),
    )


# ------------------------------------------------------------------ LP text dump


def _lp_name(prefix: str, k: int) -> str:
    return f"{prefix}{k}"


def _one_line(key) -> str:
    return re.sub(r"\s+", " ", repr(key))


def _fmt_terms(terms) -> str:
    parts = []
    for coef, name in terms:
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef):.12g} {name}")
    text = " ".join(parts) if parts else "0"
    return text[2:] if text.startswith("+ ") else text


def to_lp_text(p: LinearProgram) -> str:
    """Render ``p`` in CPLEX LP format; original ids are listed as comments."""
    lines = [f"\\ {p.name}"]
    for j, vid in enumerate(p.var_ids):
        lines.append("\\ %s = %s" % (_lp_name("x", j), _one_line(vid)))
    for i, rid in enumerate(p.row_ids):
        lines.append("\\ %s = %s" % (_lp_name("c", i), _one_line(rid)))
    lines.append("Minimize")
    lines.append(" obj: " + _fmt_terms([(cst, _lp_name("x", j)) for j, cst in enumerate(p.cost) if cst]))
    lines.append("Subject To")
    rows: list[list] = [[] for _ in p.row_ids]
    for j, entries in enumerate(p._columns):
        for i, v in sorted(entries.items()):
            rows[i].append((v, _lp_name("x", j)))
    for i in range(p.num_rows):
        op = {"<=": "<=", ">=": ">=", "=": "="}[p.senses[i]]
        lines.append(f" {_lp_name('c', i)}: {_fmt_terms(rows[i])} {op} {p.rhs[i]:.12g}")
    lines.append("Bounds")
    for j in range(p.num_vars):
        lo, hi = p.lower[j], p.upper[j]
        lo_s = "-inf" if not np.isfinite(lo) else f"{lo:.12g}"
        hi_s = "+inf" if not np.isfinite(hi) else f"{hi:.12g}"
        lines.append(f" {lo_s} <= {_lp_name('x', j)} <= {hi_s}")
    ints = [_lp_name("x", j) for j, flag in enumerate(p.integer) if flag]
    if ints:
        lines.append("Generals")
        lines.append(" " + " ".join(ints))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(p: LinearProgram, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_lp_text(p))


def maybe_dump(p: LinearProgram, tag: str) -> None:
    """Write ``p`` to ``$CARGO_RECOVERY_DUMP_LP/<tag>.lp`` when that variable is set."""
    target = os.environ.get("CARGO_RECOVERY_DUMP_LP")
    if target:
        os.makedirs(target, exist_ok=True)
        write_lp(p, os.path.join(target, f"{tag}.lp"))
