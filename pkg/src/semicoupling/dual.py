"""Kantorovich dual max program for semicouplings over a finite target.

The dual variable is the vector ``psi`` of potentials at the target points.
Its transform ``phi(x) = max_i (psi_i - c(x, y_i))`` determines the active
domain ``A = {phi >= 0}`` (mass parked outside A is simply not activated,
which is the semicoupling slack), the transport cells, and the concave dual
functional

    F(psi) = sum_i psi_i tau_i - integral of max(0, phi) dsigma,

whose gradient is ``tau_i - sigma[cell_i]``. The solver runs BFGS ascent with
Armijo backtracking and declares convergence on the mass residual
``max_i |sigma[cell_i] - tau_i|``, the marginal constraint itself.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConvergenceError
from .validation import as_float_array, check_points, frozen

# grid evaluations run in fixed-size chunks to bound the (cells, targets) buffers
_CHUNK = 1 << 16


@dataclass(frozen=True)
class Potential:
    """Dual vector ``psi`` over target points, with an optional cached phi grid."""

    psi: np.ndarray
    phi_field: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "psi", frozen(as_float_array(self.psi, "psi", ndim=1)))
        if self.phi_field is not None:
            object.__setattr__(self, "phi_field", frozen(np.asarray(self.phi_field, dtype=float)))

    @property
    def n_targets(self):
        return self.psi.size

    def with_phi_cache(self, problem):
        """Attach the c-transform evaluated on the problem grid (bit-stable)."""
        phi = grid_phi(problem, self.psi)
        return Potential(self.psi, phi)


def scores(problem, psi, X):
    """Score matrix ``psi_i - c(x, y_i)`` for points X, shape (m, n_targets)."""
    X = check_points(X, problem.dim, "X")
    return np.asarray(psi, dtype=float)[None, :] - problem.cost.pairwise(X, problem.target.points)


def c_transform(problem, psi, X):
    """c-transform ``phi(x) = max_i (psi_i - c(x, y_i))`` at points X."""
    return scores(problem, psi, X).max(axis=1)


def is_active(problem, psi, X):
    """Membership in the activated domain ``A = {phi >= 0}``."""
    return c_transform(problem, psi, X) >= 0.0


def cell_assignment(problem, psi, x, tie_tol):
    """Active flag and the tied argmax index set at a single point.

    Indices i with ``psi_i - c(x, y_i) >= phi(x) - tie_tol``, in increasing
    order. ``tie_tol = inf`` degenerates to all indices.
    """
    s = scores(problem, psi, x)[0]
    phi = s.max()
    idx = np.flatnonzero(s >= phi - tie_tol)
    return bool(phi >= 0.0), idx


def grid_phi(problem, psi):
    """phi at every grid cell center, chunked, deterministic order."""
    pts = problem.source.grid_points()
    out = np.empty(pts.shape[0])
    for a in range(0, pts.shape[0], _CHUNK):
        out[a : a + _CHUNK] = c_transform(problem, psi, pts[a : a + _CHUNK])
    return out


def _cell_accumulate(problem, psi, tie_tol, want_primal=False):
    """Quadrature of sigma (and optionally cost) over each transport cell.

    Ties within tie_tol split mass equally among the tied indices.
    Returns (cell_masses, active_mass, phi_plus_integral, primal or None).
    """
    src = problem.source
    pts = src.grid_points()
    w = src.cell_weights()
    n = problem.target.n_points
    masses = np.zeros(n)
    primal = 0.0
    active_mass = 0.0
    phi_plus = 0.0
    psi = np.asarray(psi, dtype=float)
    for a in range(0, pts.shape[0], _CHUNK):
        X = pts[a : a + _CHUNK]
        cmat = problem.cost.pairwise(X, problem.target.points)
        s = psi[None, :] - cmat
        phi = s.max(axis=1)
        act = phi >= 0.0
        tied = s >= (phi[:, None] - tie_tol)
        share = tied / tied.sum(axis=1, keepdims=True)
        share = share * (act * w[a : a + _CHUNK])[:, None]
        masses += share.sum(axis=0)
        active_mass += float(w[a : a + _CHUNK][act].sum())
        phi_plus += float(np.maximum(phi, 0.0) @ w[a : a + _CHUNK])
        if want_primal:
            cfin = np.where(np.isfinite(cmat), cmat, 0.0)
            primal += float((share * cfin).sum())
    return masses, active_mass, phi_plus, (primal if want_primal else None)


def cell_masses(problem, psi, tie_tol=None):
    """sigma-mass captured by each transport cell (grid quadrature)."""
    tie_tol = _default_tie(problem, tie_tol)
    masses, _, _, _ = _cell_accumulate(problem, psi, tie_tol)
    return masses


def dual_functional(problem, psi):
    """Dual value ``sum_i psi_i tau_i - integral of max(0, phi) dsigma``."""
    psi = as_float_array(psi, "psi", ndim=1, shape=(problem.target.n_points,))
    phi = grid_phi(problem, psi)
    w = problem.source.cell_weights()
    return float(psi @ problem.target.masses - np.maximum(phi, 0.0) @ w)


def primal_cost(problem, psi, tie_tol=None):
    """Transport cost ``sum_i integral over cell_i of c(x, y_i) dsigma``."""
    tie_tol = _default_tie(problem, tie_tol)
    _, _, _, primal = _cell_accumulate(problem, psi, tie_tol, want_primal=True)
    return primal


def grid_mass_quantum(problem):
    """Largest single-cell mass: the resolution floor for mass residuals.

    Tolerances below a few quanta cannot be met on symmetric instances,
    where whole rings of cells change assignment together.
    """
    return float(problem.source.density.max() * problem.source.cell_volume)


def _default_tie(problem, tie_tol):
    if tie_tol is not None:
        return float(tie_tol)
    if problem.tolerances.tol_tie is not None:
        return float(problem.tolerances.tol_tie)
    # ties on a generic iterate have measure O(h); a half cell of slack is enough
    return 0.5 * float(problem.source.spacing.max())


def _init_psi(problem):
    """Per-target mass quantiles of the cost field: psi_i0 = t with
    sigma({c(., y_i) <= t}) = tau_i, ignoring overlaps."""
    src = problem.source
    pts = src.grid_points()
    w = src.cell_weights()
    psi0 = np.empty(problem.target.n_points)
    for i, y in enumerate(problem.target.points):
        c = problem.cost.eval(pts, y)
        order = np.argsort(c, kind="stable")
        cum = np.cumsum(w[order])
        k = int(np.searchsorted(cum, problem.target.masses[i]))
        k = min(k, c.size - 1)
        psi0[i] = c[order][k]
    return psi0


@dataclass
class DualSolution:
    """Converged dual state: potential, per-cell masses, values, audit trail."""

    potential: Potential
    cell_masses: np.ndarray
    dual_value: float
    primal_value: float
    iterations: int
    residual: float
    iteration_log: list
    active_mass: float

    @property
    def gap(self):
        return self.primal_value - self.dual_value


def solve_dual(problem, tolerances=None, max_iters=500, verbose=0):
    """Maximize the dual functional until the marginal residual is met.

    Parameters
    ----------
    problem : Problem
    tolerances : Tolerances, optional
        Defaults to ``problem.tolerances``; ``tol_mass`` is the stopping
        residual on ``max_i |sigma[cell_i] - tau_i|``.
    max_iters : int
        Accepted-iteration budget; exceeding it raises ConvergenceError
        carrying the last residual.

    Returns
    -------
    DualSolution
    """
    tol = tolerances or problem.tolerances
    tie = _default_tie(problem, tol.tol_tie)
    tau = problem.target.masses

    def value_grad(psi):
        masses, _, phi_plus, _ = _cell_accumulate(problem, psi, tie)
        val = float(psi @ tau - phi_plus)
        return val, tau - masses, masses

    psi = _init_psi(problem)
    val, grad, masses = value_grad(psi)
    residual = float(np.abs(masses - tau).max())
    log = [(0, val, residual, 0.0)]
    n = psi.size
    H = np.eye(n)
    first_update = True
    iters = 0

    while residual > tol.tol_mass:
        if iters >= max_iters:
            raise ConvergenceError(
                f"mass residual {residual:.3g} > tol_mass {tol.tol_mass:.3g} "
                f"after {iters} iterations",
                residual=residual,
            )
        d = H @ grad
        gd = float(grad @ d)
        if gd <= 0.0:
            # stale curvature; restart from a steepest step
            H = np.eye(n)
            first_update = True
            d = grad.copy()
            gd = float(grad @ grad)

        def backtrack(d, gd):
            step = 1.0
            while step > 2.0**-40:
                trial = psi + step * d
                tval, tgrad, tmasses = value_grad(trial)
                if tval >= val + 1e-4 * step * gd:
                    return step, trial, tval, tgrad, tmasses
                step *= 0.5
            return None

        hit = backtrack(d, gd)
        if hit is None and not np.array_equal(d, grad):
            # quasi-Newton direction failed at a kink; retry steepest
            H = np.eye(n)
            first_update = True
            d = grad.copy()
            hit = backtrack(d, float(grad @ grad))
        if hit is None:
            # discrete optimum: no ascent direction left, yet the marginal
            # residual is above tol_mass -> the grid cannot resolve it
            raise ConvergenceError(
                f"dual ascent reached a grid kink with residual {residual:.3g} > "
                f"tol_mass {tol.tol_mass:.3g}; refine the grid or loosen tol_mass",
                residual=residual,
            )
        step, trial, tval, tgrad, tmasses = hit
        s = step * d
        y = grad - tgrad  # gradient change of the negated (convex) objective
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first_update:
                H = (sy / float(y @ y)) * np.eye(n)
                first_update = False
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        psi, val, grad, masses = trial, tval, tgrad, tmasses
        residual = float(np.abs(masses - tau).max())
        iters += 1
        log.append((iters, val, residual, step))
        if verbose:
            print(f"iter {iters:4d}  dual {val:.9g}  residual {residual:.3g}  step {step:.3g}")

    potential = Potential(psi).with_phi_cache(problem)
    masses, active_mass, _, primal = _cell_accumulate(problem, psi, tie, want_primal=True)
    return DualSolution(
        potential=potential,
        cell_masses=masses,
        dual_value=val,
        primal_value=primal,
        iterations=iters,
        residual=residual,
        iteration_log=log,
        active_mass=active_mass,
    )


class DualSolver(BaseEstimator):
    """Estimator facade for the dual ascent solver.

    Parameters
    ----------
    tol_mass : float or None
        Stopping residual; None defers to the problem tolerances.
    max_iters : int
        Accepted-iteration budget.

    Attributes
    ----------
    potential_ : Potential
    psi_ : ndarray
    residual_ : float
    dual_value_, primal_value_ : float
    n_iter_ : int
    solution_ : DualSolution
    """

    def __init__(self, tol_mass=None, max_iters=500, verbose=0):
        self.tol_mass = tol_mass
        self.max_iters = max_iters
        self.verbose = verbose

    def fit(self, problem, y=None):
        tol = problem.tolerances.replace(tol_mass=self.tol_mass)
        sol = solve_dual(problem, tol, max_iters=self.max_iters, verbose=self.verbose)
        self.problem_ = problem
        self.solution_ = sol
        self.potential_ = sol.potential
        self.psi_ = sol.potential.psi
        self.residual_ = sol.residual
        self.dual_value_ = sol.dual_value
        self.primal_value_ = sol.primal_value
        self.n_iter_ = sol.iterations
        return self

    def predict(self, X):
        """Transport map on active points: argmax index, -1 where inactive."""
        s = scores(self.problem_, self.psi_, X)
        idx = s.argmax(axis=1)
        idx[s.max(axis=1) < 0.0] = -1
        return idx
