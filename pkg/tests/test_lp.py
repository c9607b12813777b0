from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from cachenet.lp import (
    LPInfeasibleError,
    LPUnboundedError,
    solve_lp,
)


def _scipy_value(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, upper=None,
                 maximize=False):
    cc = -np.asarray(c, float) if maximize else np.asarray(c, float)
    if upper is None:
        bounds = [(0, None)] * len(cc)
    else:
        up = np.broadcast_to(np.asarray(upper, float), (len(cc),))
        bounds = [(0, None if np.isinf(u) else u) for u in up]
    res = linprog(cc, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if not res.success:
        return None
    return -res.fun if maximize else res.fun


def test_textbook_maximization():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
    res = solve_lp([3, 5], a_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18],
                   maximize=True)
    assert res.value == pytest.approx(36.0, abs=1e-9)
    assert res.x == pytest.approx([2.0, 6.0], abs=1e-9)


def test_equality_and_upper_bounds():
    # min x1 + 2x2 + 3x3 s.t. x1 + x2 + x3 = 2, x <= 1
    res = solve_lp([1, 2, 3], a_eq=[[1, 1, 1]], b_eq=[2], upper=1.0)
    assert res.value == pytest.approx(3.0, abs=1e-9)
    assert res.x == pytest.approx([1.0, 1.0, 0.0], abs=1e-9)


def test_infeasible():
    with pytest.raises(LPInfeasibleError):
        solve_lp([1, 1], a_eq=[[1, 1]], b_eq=[5], upper=1.0)


def test_unbounded():
    with pytest.raises(LPUnboundedError):
        solve_lp([-1, 0], a_ub=[[0, 1]], b_ub=[1])


def test_negative_rhs_rows():
    # x >= 1 written as -x <= -1, minimize x
    res = solve_lp([1], a_ub=[[-1]], b_ub=[-1])
    assert res.value == pytest.approx(1.0, abs=1e-9)


def test_no_constraints_with_upper_bounds():
    res = solve_lp([-2, 1], upper=[3, 5])
    assert res.value == pytest.approx(-6.0)


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("rule", ["bland", "dantzig"])
def test_random_instances_match_scipy(seed, rule):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    m_ub = int(rng.integers(1, 6))
    m_eq = int(rng.integers(0, 3))
    c = rng.normal(size=n)
    a_ub = rng.normal(size=(m_ub, n))
    b_ub = rng.uniform(0.5, 3.0, size=m_ub)
    if m_eq:
        a_eq = np.abs(rng.normal(size=(m_eq, n))) + 0.1
        b_eq = rng.uniform(0.5, 1.5, size=m_eq)
    else:
        a_eq = b_eq = None
    upper = rng.uniform(0.5, 4.0, size=n)
    expected = _scipy_value(c, a_ub, b_ub, a_eq, b_eq, upper)
    if expected is None:
        with pytest.raises(LPInfeasibleError):
            solve_lp(c, a_ub, b_ub, a_eq, b_eq, upper=upper, rule=rule)
        return
    res = solve_lp(c, a_ub, b_ub, a_eq, b_eq, upper=upper, rule=rule)
    assert res.value == pytest.approx(expected, abs=1e-6)
    # returned point must actually satisfy the constraints
    assert np.all(a_ub @ res.x <= b_ub + 1e-7)
    if a_eq is not None:
        assert np.allclose(a_eq @ res.x, b_eq, atol=1e-7)
    assert np.all(res.x >= -1e-9)
    assert np.all(res.x <= upper + 1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_random_coverage_style_instances(seed):
    # shaped like the placement relaxation: capacity rows plus >=1 coverage
    rng = np.random.default_rng(100 + seed)
    m, n = 3, 6
    sizes = rng.uniform(1.0, 3.0, size=n)
    caps = rng.uniform(4.0, 8.0, size=m)
    profit = rng.uniform(0.1, 5.0, size=(m, n))
    nv = m * n
    c = profit.ravel()
    a_ub = np.zeros((m + n, nv))
    b_ub = np.zeros(m + n)
    for i in range(m):
        a_ub[i, i * n:(i + 1) * n] = sizes
        b_ub[i] = caps[i]
    for k in range(n):
        a_ub[m + k, k::n] = -1.0
        b_ub[m + k] = -1.0
    expected = _scipy_value(c, a_ub, b_ub, upper=1.0, maximize=True)
    res = solve_lp(c, a_ub, b_ub, upper=1.0, maximize=True)
    assert expected is not None
    assert res.value == pytest.approx(expected, rel=1e-7, abs=1e-7)
