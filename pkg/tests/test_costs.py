import math

import numpy as np
import pytest

import semicoupling as sc
from semicoupling.costs import cost_eval, cost_grad_x, cost_hess_x

from conftest import unit_square_source


def fd_gradient(cost, x, y, h=1e-6):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (cost_eval(cost, x + e, y) - cost_eval(cost, x - e, y)) / (2 * h)
    return g


def test_quadratic_point_values():
    c = sc.QuadraticCost()
    x, y = np.array([1.0, 0.0]), np.array([0.0, 0.0])
    assert cost_eval(c, x, y) == pytest.approx(0.5)
    assert cost_grad_x(c, x, y) == pytest.approx([1.0, 0.0])
    assert cost_hess_x(c, x, y) == pytest.approx(np.eye(2))


def test_quadratic_zero_case():
    c = sc.QuadraticCost()
    x = np.array([0.3, -0.2])
    assert cost_eval(c, x, x) == 0.0
    assert cost_grad_x(c, x, x) == pytest.approx([0.0, 0.0])


@pytest.mark.parametrize("cost", [sc.QuadraticCost(), sc.LogRepulsiveCost(offset=2.0)])
def test_gradient_matches_central_differences(cost):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(-1, 1, 2)
        y = rng.uniform(-1, 1, 2)
        if np.linalg.norm(x - y) < 0.2:
            continue
        g = cost_grad_x(cost, x, y)
        fd = fd_gradient(cost, x, y)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst <= 1e-5


@pytest.mark.parametrize("cost", [sc.QuadraticCost(), sc.LogRepulsiveCost(offset=2.0)])
def test_hessian_symmetric(cost):
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = rng.uniform(-1, 1, 2)
        y = rng.uniform(-1, 1, 2)
        if np.linalg.norm(x - y) < 0.2:
            continue
        H = cost_hess_x(cost, x, y)
        assert np.abs(H - H.T).max() <= 1e-10


def test_log_repulsive_pole_signals_out_of_domain():
    c = sc.LogRepulsiveCost(offset=1.0)
    x = np.array([0.25, 0.25])
    with pytest.raises(sc.OutOfDomainError):
        cost_eval(c, x, x)
    # batched evaluation keeps the pole as +inf so reductions stay usable
    vals = c.eval(np.array([[0.25, 0.25], [1.0, 0.0]]), x)
    assert vals[0] == np.inf and np.isfinite(vals[1])


def test_log_repulsive_nonnegative_with_auto_offset_scale():
    diam = 2 * math.sqrt(2)
    c = sc.LogRepulsiveCost(offset=math.log(diam))
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, (200, 2))
    y = np.array([0.2, -0.3])
    vals = c.eval(X, y)
    assert vals[np.isfinite(vals)].min() >= -1e-12


def test_user_cost_finite_difference_fallback():
    fn = lambda X, y: np.exp(-((X - y) ** 2).sum(1))
    c = sc.UserCost(fn)
    x = np.array([0.4, 0.1])
    y = np.array([0.0, 0.0])
    expected = -2.0 * (x - y) * math.exp(-float(((x - y) ** 2).sum()))
    assert cost_grad_x(c, x, y) == pytest.approx(expected, rel=1e-4)
    H = cost_hess_x(c, x, y)
    assert np.abs(H - H.T).max() <= 1e-8


def _audit(cost, masses=(0.3, 0.2)):
    src = unit_square_source(16)
    tgt = sc.TargetMeasure([[-0.4, 0.0], [0.4, 0.0]], list(masses))
    prob = sc.Problem(src, tgt, cost)
    return sc.audit_assumptions(cost, prob.source, prob.target, prob.tolerances, rng=0)


def test_audit_quadratic_all_pass():
    report = _audit(sc.QuadraticCost())
    assert report.passed
    assert {c.name for c in report.checks} == {"A0", "A1", "A3", "A4", "A5"}


def test_audit_constant_cost_fails_nonconstancy():
    report = _audit(sc.UserCost(lambda X, y: np.ones(X.shape[0])))
    assert not report["A3"].passed
    assert report["A3"].witness is not None


def test_audit_target_independent_cost_fails_twist():
    report = _audit(sc.UserCost(lambda X, y: 0.5 * np.einsum("ij,ij->i", X, X)))
    assert report["A3"].passed
    assert not report["A4"].passed


def test_audit_log_repulsive_passes():
    report = _audit(sc.LogRepulsiveCost(offset=math.log(2 * math.sqrt(2))))
    assert report.passed


def test_make_cost_dispatch():
    assert isinstance(sc.make_cost("quadratic"), sc.QuadraticCost)
    assert isinstance(sc.make_cost("log-repulsive", offset=1.0), sc.LogRepulsiveCost)
    with pytest.raises(ValueError):
        sc.make_cost("nope")
