"""Singularity strata of the dual potential.

A point of the active domain is stratified by the rank of the span of the
cross-difference gradients ``grad_x c(x, y_k) - grad_x c(x, y_0)`` over its
tied target set: rank >= j puts the point in stratum ``Z_{j+1}``, giving the
nested filtration ``X = Z_0 >= A = Z_1 >= Z_2 >= ...``. Ties are detected by
an energy gap rather than exact equality, with a default gap scaled to the
grid spacing and the local Lipschitz bound of phi.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .boxcount import dimension_from_counts
from .dual import scores
from .errors import InactivePointError
from .validation import check_points

_TIE_FACTOR = 10.0  # default gap: 10 * h * |grad phi|_local


@dataclass(frozen=True)
class SubdifferentialSet:
    """Tied target indices at an active point, with their score gaps (<= 0)."""

    point: np.ndarray
    indices: np.ndarray
    gaps: np.ndarray


@dataclass(frozen=True)
class TangentProjector:
    """Orthogonal projector onto the tangent space of the local cell Z'(x)."""

    point: np.ndarray
    basis: np.ndarray  # (d, m) orthonormal columns
    projector: np.ndarray  # (d, d), symmetric idempotent

    @property
    def rank(self):
        return self.basis.shape[1]


@dataclass
class StratumField:
    """Per-grid-cell stratum data in flat row-major cell order."""

    resolution: tuple
    points: np.ndarray      # (m, d) cell centers
    active: np.ndarray      # (m,) bool
    cardinality: np.ndarray  # (m,) int, tied-set size on active cells, 0 off A
    rank: np.ndarray        # (m,) int
    tie_tol: np.ndarray     # (m,) float, the gap used per cell

    @property
    def label(self):
        """Deepest stratum index per cell: x in Z_j for all j <= label."""
        return np.where(self.active, self.rank + 1, 0)

    def stratum_mask(self, j):
        """Cells belonging to Z_j (j = 0 is the whole grid)."""
        if j <= 0:
            return np.ones(self.active.size, dtype=bool)
        return self.label >= j

    def counts(self, j_max=None):
        if j_max is None:
            j_max = int(self.label.max(initial=0))
        return {j: int(self.stratum_mask(j).sum()) for j in range(j_max + 1)}


def local_tie_gap(problem, psi, X):
    """Per-point default tie gap ``10 * h * |grad_x c(x, y_argmax)|``."""
    X = check_points(X, problem.dim, "X")
    s = scores(problem, psi, X)
    best = s.argmax(axis=1)
    h = float(problem.source.spacing.max())
    g = np.empty(X.shape[0])
    for i in np.unique(best):
        rows = best == i
        grads = problem.cost.grad_x(X[rows], problem.target.points[i])
        g[rows] = np.linalg.norm(grads, axis=1)
    return _TIE_FACTOR * h * g


def subdifferential(problem, potential, x, tie_tol):
    """Tied target set at an active point.

    Raises InactivePointError when ``phi(x) < -tie_tol``.
    """
    x = np.asarray(x, dtype=float)
    s = scores(problem, potential.psi, x)[0]
    phi = s.max()
    if phi < -tie_tol:
        raise InactivePointError(f"point {x.tolist()} is not in the active domain")
    idx = np.flatnonzero(s >= phi - tie_tol)
    return SubdifferentialSet(point=x, indices=idx, gaps=s[idx] - phi)


def cross_diff_gradients(problem, x, indices):
    """Rows ``grad_x c(x, y_k) - grad_x c(x, y_0)`` for the tied set.

    The first index plays the role of y_0; fewer than two indices give an
    empty (0, d) matrix. For the quadratic cost the rows are ``y_0 - y_k``.
    """
    indices = np.asarray(indices, dtype=int)
    if indices.size < 2:
        return np.zeros((0, problem.dim))
    x = np.asarray(x, dtype=float)
    grads = np.stack(
        [problem.cost.grad_x(x[None, :], problem.target.points[i])[0] for i in indices]
    )
    return grads[1:] - grads[0]


def _rank_of(rows, tol_rank):
    if rows.shape[0] == 0:
        return 0
    sv = np.linalg.svd(rows, compute_uv=False)
    return int((sv > tol_rank * max(sv[0], 1.0)).sum())


def stratum_rank(problem, potential, x, tolerances=None, tie_tol=None):
    """Span dimension of the cross-difference gradients at an active point."""
    tol = tolerances or problem.tolerances
    if tie_tol is None:
        tie_tol = tol.tol_tie
    if tie_tol is None:
        tie_tol = float(local_tie_gap(problem, potential.psi, np.asarray(x)[None, :])[0])
    sub = subdifferential(problem, potential, x, tie_tol)
    rows = cross_diff_gradients(problem, x, sub.indices)
    return _rank_of(rows, tol.tol_rank)


def tangent_projector(problem, potential, x, tolerances=None, tie_tol=None):
    """Orthonormal basis and projector for the tangent space of Z'(x).

    The tangent space is the nullspace of the cross-difference gradient
    rows; full rank yields the zero projector (zero-dimensional tangent).
    """
    tol = tolerances or problem.tolerances
    if tie_tol is None:
        tie_tol = tol.tol_tie
    if tie_tol is None:
        tie_tol = float(local_tie_gap(problem, potential.psi, np.asarray(x)[None, :])[0])
    sub = subdifferential(problem, potential, x, tie_tol)
    rows = cross_diff_gradients(problem, x, sub.indices)
    return projector_from_rows(np.asarray(x, dtype=float), rows, tol.tol_rank)


def projector_from_rows(x, rows, tol_rank):
    d = x.size
    if rows.shape[0] == 0:
        return TangentProjector(x, np.eye(d), np.eye(d))
    _, sv, Vt = np.linalg.svd(rows, full_matrices=True)
    r = int((sv > tol_rank * max(sv[0], 1.0)).sum())
    basis = Vt[r:].T  # (d, d - r)
    P = basis @ basis.T
    return TangentProjector(x, basis, P)


def stratify(problem, potential, tolerances=None):
    """Label every grid cell with activity, tied cardinality, and rank."""
    tol = tolerances or problem.tolerances
    src = problem.source
    pts = src.grid_points()
    psi = potential.psi
    s = scores(problem, psi, pts)
    phi = s.max(axis=1)
    active = phi >= 0.0
    if tol.tol_tie is not None:
        tie = np.full(pts.shape[0], float(tol.tol_tie))
        problem.warn_tie_gap(float(tol.tol_tie))
    else:
        tie = local_tie_gap(problem, psi, pts)
    tied = s >= (phi - tie)[:, None]
    card = np.where(active, tied.sum(axis=1), 0)

    rank = np.zeros(pts.shape[0], dtype=int)
    multi = np.flatnonzero(active & (card >= 2))
    # batch the SVDs by tied-set cardinality
    for k in np.unique(card[multi]):
        sel = multi[card[multi] == k]
        rows = np.empty((sel.size, k - 1, problem.dim))
        for pos, cell in enumerate(sel):
            idx = np.flatnonzero(tied[cell])
            rows[pos] = cross_diff_gradients(problem, pts[cell], idx)
        sv = np.linalg.svd(rows, compute_uv=False)
        lead = np.maximum(sv[:, 0], 1.0)
        rank[sel] = (sv > tol.tol_rank * lead[:, None]).sum(axis=1)

    return StratumField(
        resolution=src.resolution,
        points=pts,
        active=active,
        cardinality=card.astype(int),
        rank=rank,
        tie_tol=tie,
    )


def closedness_witness(problem, potential, field):
    """Min over Z_2 cells of the largest cross-difference gradient norm.

    A uniform positive witness supports closedness of Z_2 (the Clarke
    implicit-function criterion); the audit only reports it.
    """
    cells = np.flatnonzero(field.stratum_mask(2))
    if cells.size == 0:
        return None
    s = scores(problem, potential.psi, field.points[cells])
    phi = s.max(axis=1)
    tied = s >= (phi - field.tie_tol[cells])[:, None]
    worst = np.inf
    for pos, cell in enumerate(cells):
        idx = np.flatnonzero(tied[pos])
        rows = cross_diff_gradients(problem, field.points[cell], idx)
        if rows.shape[0]:
            worst = min(worst, float(np.linalg.norm(rows, axis=1).max()))
    return worst if np.isfinite(worst) else None


def dimension_audit(problem, potential, tolerances=None, resolutions=(128, 256, 512)):
    """Box-counting dimension estimates of each stratum across resolutions.

    The potential is fixed; the grid is refined, the field re-stratified,
    and cell counts per stratum regressed against resolution on log axes.
    Reports the Alberti upper bound ``d - j + 1`` and flags estimates that
    exceed it beyond estimator noise, plus the Z_2 closedness witness.
    """
    if len(resolutions) < 3:
        raise ValueError("need at least 3 resolutions for a slope estimate")
    tol = tolerances or problem.tolerances
    counts = {}
    finest_field = None
    for res in sorted(resolutions):
        prob_r = problem.with_resolution(res)
        field = stratify(prob_r, potential, tol)
        finest_field = (prob_r, field)
        for j in range(2, int(field.label.max(initial=1)) + 1):
            counts.setdefault(j, []).append(int(field.stratum_mask(j).sum()))

    d = problem.dim
    noise = 0.35
    strata = {}
    res_sorted = np.asarray(sorted(resolutions), dtype=float)
    for j, cnt in sorted(counts.items()):
        cnt = np.asarray(cnt, dtype=float)
        if np.any(cnt == 0) or cnt.size < 3:
            strata[j] = {
                "counts": cnt.astype(int).tolist(),
                "dimension": None,
                "r2": None,
                "alberti_bound": d - j + 1,
                "violates_bound": False,
            }
            continue
        slope, r2 = dimension_from_counts(res_sorted, cnt)
        strata[j] = {
            "counts": cnt.astype(int).tolist(),
            "dimension": slope,
            "r2": r2,
            "alberti_bound": d - j + 1,
            "violates_bound": bool(slope > d - j + 1 + noise),
        }

    prob_f, field_f = finest_field
    witness = closedness_witness(prob_f, potential, field_f)
    return {
        "resolutions": [int(r) for r in sorted(resolutions)],
        "strata": strata,
        "closedness_witness": witness,
        "passed": not any(v["violates_bound"] for v in strata.values()),
    }


class Stratifier(BaseEstimator):
    """Estimator facade: fit stratifies the grid, transform labels points.

    Attributes
    ----------
    field_ : StratumField
    counts_ : dict stratum index -> cell count
    """

    def __init__(self, tie_tol=None, rank_tol=None):
        self.tie_tol = tie_tol
        self.rank_tol = rank_tol

    def fit(self, problem, potential):
        tol = problem.tolerances.replace(tol_rank=self.rank_tol)
        if self.tie_tol is not None:
            tol = tol.replace(tol_tie=self.tie_tol)
        self.problem_ = problem
        self.potential_ = potential
        self.tolerances_ = tol
        self.field_ = stratify(problem, potential, tol)
        self.counts_ = self.field_.counts()
        return self

    def transform(self, X):
        """Per-point rows [active, cardinality, rank] as an (m, 3) int array."""
        X = check_points(X, self.problem_.dim, "X")
        tol = self.tolerances_
        out = np.zeros((X.shape[0], 3), dtype=int)
        s = scores(self.problem_, self.potential_.psi, X)
        phi = s.max(axis=1)
        if tol.tol_tie is not None:
            tie = np.full(X.shape[0], float(tol.tol_tie))
        else:
            tie = local_tie_gap(self.problem_, self.potential_.psi, X)
        for i in range(X.shape[0]):
            if phi[i] < 0.0:
                continue
            idx = np.flatnonzero(s[i] >= phi[i] - tie[i])
            rows = cross_diff_gradients(self.problem_, X[i], idx)
            out[i] = (1, idx.size, _rank_of(rows, tol.tol_rank))
        return out
