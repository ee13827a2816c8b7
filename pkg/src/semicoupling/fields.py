"""Averaged blow-up potentials and the vector fields driving the retractions.

Off the active domain the (negative-signed) potential

    f_avg(x) = (1 - beta)^{-1} * mean_i w_i (c(x, y_i) - psi_i)^{1 - beta}

has gradient ``eta_avg(x) = mean_i w_i u_i^{-beta} grad_x c(x, y_i)`` with
``u_i = c(x, y_i) - psi_i``; the gradient diverges as x approaches the
boundary of A. On a stratum, the cellular field averages projected
cross-difference gradients weighted by the tie gap to each non-tied target
and the order weight ``nu_x(y)^beta``, and is tangent to the local cell.

Flows integrate the pole-seeking direction, which is ``-eta_avg``; the
paper-facing evaluators here return ``eta_avg = grad f_avg`` itself.
"""

from dataclasses import dataclass

import numpy as np

from .dual import scores
from .errors import InactivePointError, PoleError
from .singularity import cross_diff_gradients, projector_from_rows

_FLOW_MODES = ("off_domain", "cellular")


@dataclass(frozen=True)
class FieldSpec:
    """Which averaged field to build: mode, exponent, and stratum index.

    ``beta = None`` resolves to ``dim(Y) + 2``: 2 for finite targets, 3 for
    quadrature-weighted curve targets. Cellular mode requires ``stratum >= 1``.
    """

    mode: str = "off_domain"
    beta: float | None = None
    stratum: int | None = None

    def __post_init__(self):
        if self.mode not in _FLOW_MODES:
            raise ValueError(f"mode must be one of {_FLOW_MODES}")
        if self.beta is not None and self.beta < 2.0:
            raise ValueError("beta must be at least 2")
        if self.mode == "cellular" and self.stratum is not None and self.stratum < 1:
            raise ValueError("cellular mode needs stratum >= 1")

    def resolve_beta(self, target):
        if self.beta is not None:
            return float(self.beta)
        return float(target.target_dim + 2)


def u_values(problem, psi, x):
    """Slacks ``u_i = c(x, y_i) - psi_i`` at a single point."""
    return -scores(problem, psi, np.asarray(x, dtype=float))[0]


def f_avg(problem, potential, x, beta=None, weights=None):
    """Averaged potential at a point strictly outside the active domain.

    Raises PoleError when ``min_i u_i <= 0`` (x active or on the boundary).
    """
    beta, w = _resolve(problem, beta, weights)
    u = u_values(problem, potential.psi, x)
    if u.min() <= 0.0:
        raise PoleError(f"f_avg has a pole at u_min = {u.min():.3g} <= 0")
    vals = u ** (1.0 - beta)
    return float((w @ vals) / (1.0 - beta))


def eta_off_domain(problem, potential, x, beta=None, weights=None):
    """Gradient of f_avg: weighted mean of ``u_i^{-beta} grad_x c(x, y_i)``."""
    beta, w = _resolve(problem, beta, weights)
    x = np.asarray(x, dtype=float)
    u = u_values(problem, potential.psi, x)
    if u.min() <= 0.0:
        raise PoleError(f"eta_off_domain has a pole at u_min = {u.min():.3g} <= 0")
    grads = np.stack(
        [problem.cost.grad_x(x[None, :], y)[0] for y in problem.target.points]
    )
    return (w * u**-beta) @ grads


def _resolve(problem, beta, weights):
    if beta is None:
        beta = float(problem.target.target_dim + 2)
    if weights is None:
        w = problem.target.averaging_weights()
    else:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
    return float(beta), w


def nu_weight(problem, potential, x, y_index, tie_tol, orders=None):
    """Order-weighted distance product ``nu_x(y)`` in [0, 1].

    Zero exactly when y_index is tied at x; otherwise the product of
    distances from y to the tied targets, each raised to its order
    (default 1, overridable per target), capped at 1.
    """
    s = scores(problem, potential.psi, np.asarray(x, dtype=float))[0]
    phi = s.max()
    tied = np.flatnonzero(s >= phi - tie_tol)
    if y_index in tied:
        return 0.0
    y = problem.target.points[y_index]
    prod = 1.0
    for i in tied:
        ordr = 1 if orders is None else int(orders.get(int(i), 1))
        prod *= float(np.linalg.norm(y - problem.target.points[i])) ** ordr
    return min(1.0, prod)


def eta_cellular(problem, potential, x, beta=None, tolerances=None,
                 tie_tol=None, tied=None, orders=None, weights=None):
    """Averaged tangent field on a stratum cell.

    The tie gap to a non-tied target is ``g(y) = c(x, y) - psi(y) + phi(x)``,
    which equals the paper's ``psi(y_0) - psi(y) + c_Delta(x; y, y_0)`` at an
    exact tie but does not depend on the tied representative y_0; the
    leftover y_0 dependence sits in the projected tied-gradient difference,
    which the tangent projector annihilates. Tied targets contribute zero
    through the order weight.

    Returns (vector, degenerate_flag); the flag marks a rank-d point whose
    tangent space, and hence field, is zero.
    """
    tol = tolerances or problem.tolerances
    beta, w = _resolve(problem, beta, weights)
    x = np.asarray(x, dtype=float)
    s = scores(problem, potential.psi, x)[0]
    phi = s.max()
    if tie_tol is None:
        tie_tol = tol.tol_tie
    if tie_tol is None:
        from .singularity import local_tie_gap

        tie_tol = float(local_tie_gap(problem, potential.psi, x[None, :])[0])
    if phi < -tie_tol:
        raise InactivePointError("cellular field needs an active point")
    if tied is None:
        tied = np.flatnonzero(s >= phi - tie_tol)
    tied = np.asarray(tied, dtype=int)
    if tied.size < 2:
        raise InactivePointError("cellular field needs a tied set of size >= 2")

    rows = cross_diff_gradients(problem, x, tied)
    proj = projector_from_rows(x, rows, tol.tol_rank)
    if proj.rank == 0:
        return np.zeros(problem.dim), True

    y0 = int(tied[0])
    g0 = problem.cost.grad_x(x[None, :], problem.target.points[y0])[0]
    out = np.zeros(problem.dim)
    for i in range(problem.target.n_points):
        if i in tied:
            continue
        gap = float(-s[i] + phi)  # c(x,y_i) - psi_i + phi(x) > 0 off the tie
        if gap <= 0.0:
            raise PoleError(
                f"cellular field has a pole: target {i} ties at the evaluation point"
            )
        nu = 1.0
        for j in tied:
            ordr = 1 if orders is None else int(orders.get(int(j), 1))
            nu *= float(np.linalg.norm(problem.target.points[i] - problem.target.points[j])) ** ordr
        nu = min(1.0, nu)
        if nu == 0.0:
            continue
        gi = problem.cost.grad_x(x[None, :], problem.target.points[i])[0]
        out += w[i] * (nu**beta) * gap**-beta * (proj.projector @ (gi - g0))
    return out, False
