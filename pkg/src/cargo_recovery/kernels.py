"""Hot numeric loops with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``CARGO_RECOVERY_JIT`` is not
set to ``0``. Both paths return identical results; ``tests/test_kernels.py``
checks that, and ``cargo-recovery bench`` times them against each other.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

AT_LOWER, AT_UPPER, FREE, FIXED, BASIC = 1, 2, 3, 4, 0

FLIP = -1
UNBOUNDED = -2


def jit_requested() -> bool:
    return os.environ.get("CARGO_RECOVERY_JIT", "1").strip().lower() not in ("0", "false", "no", "off")


# ---------------------------------------------------------------- numpy path


def _entering_np(d, state, tol, bland):
    up = (state == AT_LOWER) & (d < -tol)
    down = (state == AT_UPPER) & (d > tol)
    free = (state == FREE) & (np.abs(d) > tol)
    eligible = up | down | free
    if not eligible.any():
        return -1
    if bland:
        return int(np.flatnonzero(eligible)[0])
    score = np.where(eligible, np.abs(d), -1.0)
    return int(np.argmax(score))


def _ratio_np(alpha, x_basic, lb_basic, ub_basic, basis, direction, flip_limit, piv_tol, bland, harris_tol):
    """Two-pass ratio test: bound the step with slightly relaxed bounds, then
    take the largest pivot among rows blocking within that bound."""
    delta = direction * alpha
    exact = np.full(delta.shape[0], np.inf)
    relaxed = np.full(delta.shape[0], np.inf)
    dec = (delta > piv_tol) & np.isfinite(lb_basic)
    inc = (delta < -piv_tol) & np.isfinite(ub_basic)
    exact[dec] = (x_basic[dec] - lb_basic[dec]) / delta[dec]
    exact[inc] = (ub_basic[inc] - x_basic[inc]) / (-delta[inc])
    np.maximum(exact, 0.0, out=exact)
    if bland:
        theta = exact.min() if exact.shape[0] else np.inf
        if flip_limit <= theta:
            return (np.inf, UNBOUNDED) if np.isinf(flip_limit) else (flip_limit, FLIP)
        ties = np.flatnonzero(exact <= theta + 1e-12)
        row = ties[np.argmin(basis[ties])]
        return float(theta), int(row)
    relaxed[dec] = (x_basic[dec] - lb_basic[dec] + harris_tol) / delta[dec]
    relaxed[inc] = (ub_basic[inc] - x_basic[inc] + harris_tol) / (-delta[inc])
    np.maximum(relaxed, 0.0, out=relaxed)
    bound = relaxed.min() if relaxed.shape[0] else np.inf
    if np.isinf(bound):
        return (np.inf, UNBOUNDED) if np.isinf(flip_limit) else (flip_limit, FLIP)
    ties = np.flatnonzero(exact <= bound)
    row = ties[np.argmax(np.abs(delta[ties]))]
    theta = float(exact[row])
    if flip_limit <= theta:
        return flip_limit, FLIP
    return theta, int(row)


def _gini_split_np(x, y, min_leaf):
    n = y.shape[0]
    if n < 2 * min_leaf:
        return np.inf, -1
    pos_left = np.cumsum(y)[:-1].astype(np.float64)
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    pos_right = y.sum() - pos_left
    p_left = pos_left / n_left
    p_right = pos_right / n_right
    child = n_left * 2.0 * p_left * (1.0 - p_left) + n_right * 2.0 * p_right * (1.0 - p_right)
    valid = (x[1:] > x[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return np.inf, -1
    child = np.where(valid, child / n, np.inf)
    k = int(np.argmin(child))
    return float(child[k]), k + 1


# ---------------------------------------------------------------- numba path

if numba is not None:

    @numba.njit(cache=True)
    def _entering_nb(d, state, tol, bland):
        best = -1
        best_score = -1.0
        for j in range(d.shape[0]):
            s = state[j]
            dj = d[j]
            ok = (s == 1 and dj < -tol) or (s == 2 and dj > tol) or (s == 3 and abs(dj) > tol)
            if not ok:
                continue
            if bland:
                return j
            if abs(dj) > best_score:
                best_score = abs(dj)
                best = j
        return best

    @numba.njit(cache=True)
    def _ratio_nb(alpha, x_basic, lb_basic, ub_basic, basis, direction, flip_limit, piv_tol, bland, harris_tol):
        m = alpha.shape[0]
        exact = np.empty(m)
        theta = np.inf
        bound = np.inf
        for i in range(m):
            delta = direction * alpha[i]
            r = np.inf
            rr = np.inf
            if delta > piv_tol and np.isfinite(lb_basic[i]):
                r = (x_basic[i] - lb_basic[i]) / delta
                rr = (x_basic[i] - lb_basic[i] + harris_tol) / delta
            elif delta < -piv_tol and np.isfinite(ub_basic[i]):
                r = (ub_basic[i] - x_basic[i]) / (-delta)
                rr = (ub_basic[i] - x_basic[i] + harris_tol) / (-delta)
            if r < 0.0:
                r = 0.0
            if rr < 0.0:
                rr = 0.0
            exact[i] = r
            if r < theta:
                theta = r
            if rr < bound:
                bound = rr
        if bland:
            if flip_limit <= theta:
                if np.isinf(flip_limit):
                    return np.inf, -2
                return flip_limit, -1
            row = -1
            for i in range(m):
                if exact[i] <= theta + 1e-12:
                    if row < 0 or basis[i] < basis[row]:
                        row = i
            return theta, row
        if np.isinf(bound):
            if np.isinf(flip_limit):
                return np.inf, -2
            return flip_limit, -1
        row = -1
        for i in range(m):
            if exact[i] <= bound:
                if row < 0 or abs(alpha[i]) > abs(alpha[row]):
                    row = i
        if flip_limit <= exact[row]:
            return flip_limit, -1
        return exact[row], row

    @numba.njit(cache=True)
    def _gini_split_nb(x, y, min_leaf):
        n = y.shape[0]
        if n < 2 * min_leaf:
            return np.inf, -1
        total_pos = 0.0
        for i in range(n):
            total_pos += y[i]
        pos_left = 0.0
        best = np.inf
        best_k = -1
        for k in range(1, n):
            pos_left += y[k - 1]
            if k < min_leaf or n - k < min_leaf or not x[k] > x[k - 1]:
                continue
            nl = float(k)
            nr = float(n - k)
            pl = pos_left / nl
            pr = (total_pos - pos_left) / nr
            child = (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / n
            if child < best:
                best = child
                best_k = k
        return best, best_k


NUMPY = SimpleNamespace(name="numpy", entering=_entering_np, ratio=_ratio_np, gini_split=_gini_split_np)
NUMBA = (
    SimpleNamespace(name="numba", entering=_entering_nb, ratio=_ratio_nb, gini_split=_gini_split_nb)
    if numba is not None
    else None
)


def active():
    """Kernel set chosen from the environment at call time."""
    if NUMBA is not None and jit_requested():
        return NUMBA
    return NUMPY
