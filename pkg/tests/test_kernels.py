import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cargo_recovery import kernels
from cargo_recovery.kernels import AT_LOWER, AT_UPPER, BASIC, FREE

pytestmark = pytest.mark.skipif(kernels.NUMBA is None, reason="numba not installed")


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return a == b or (np.isnan(a) and np.isnan(b)) or np.isclose(a, b, rtol=1e-12, atol=0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 60), st.booleans())
def test_entering_backends_agree(seed, n, bland):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=n) * (rng.random(n) < 0.7)
    state = rng.choice(np.array([AT_LOWER, AT_UPPER, FREE, BASIC], dtype=np.int64), size=n)
    args = (d, state, 1e-9, bland)
    assert kernels.NUMPY.entering(*args) == kernels.NUMBA.entering(*args)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 40), st.booleans(), st.sampled_from([1.0, -1.0]),
       st.sampled_from([np.inf, 0.5, 3.0]))
def test_ratio_backends_agree(seed, m, bland, direction, flip_limit):
    rng = np.random.default_rng(seed)
    alpha = rng.normal(size=m) * (rng.random(m) < 0.8)
    xb = rng.uniform(0, 4, size=m).round(2)
    lo = np.where(rng.random(m) < 0.9, 0.0, -np.inf)
    hi = np.where(rng.random(m) < 0.5, xb + rng.uniform(0, 4, size=m).round(2), np.inf)
    basis = rng.permutation(3 * m)[:m].astype(np.int64)
    args = (alpha, xb, lo, hi, basis, direction, flip_limit, 1e-7, bland, 1e-7)
    assert _same(kernels.NUMPY.ratio(*args), kernels.NUMBA.ratio(*args))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 80), st.integers(1, 6))
def test_gini_backends_agree(seed, n, min_leaf):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.integers(0, 6, size=n).astype(np.float64))
    y = (rng.random(n) < 0.3).astype(np.int64)
    assert _same(kernels.NUMPY.gini_split(x, y, min_leaf), kernels.NUMBA.gini_split(x, y, min_leaf))


def test_jit_switch(monkeypatch):
    monkeypatch.setenv("CARGO_RECOVERY_JIT", "0")
    assert kernels.active() is kernels.NUMPY
    monkeypatch.setenv("CARGO_RECOVERY_JIT", "1")
    assert kernels.active() is kernels.NUMBA


def test_ratio_reports_unbounded_direction():
    alpha = np.array([-1.0, 0.0])
    args = (alpha, np.zeros(2), np.zeros(2), np.full(2, np.inf), np.arange(2), 1.0, np.inf, 1e-7, False, 1e-7)
    for backend in (kernels.NUMPY, kernels.NUMBA):
        assert backend.ratio(*args)[1] == kernels.UNBOUNDED
