"""Uniform Halfspace condition checks over sampled regions.

At each sample the averaged field, the mean integrand norm, their ratio
(the empirical constant of the halfspace estimate), and the distance from
the origin to the convex hull of the driving gradients are reported. The
hull distance is the geometric criterion: a hull containing the origin
admits no uniform halfspace and marks the sample as failing, as does a
field norm below ``eps_uhs``.
"""

from dataclasses import dataclass

import numpy as np

from .dual import scores
from .errors import PoleError
from .fields import eta_cellular, eta_off_domain, u_values
from .hull import hull_distance
from .singularity import cross_diff_gradients, local_tie_gap, projector_from_rows

_HULL_ZERO = 1e-9


@dataclass
class UHSReport:
    """Per-sample UHS quantities and region minima."""

    region: str
    samples: np.ndarray          # (m, d)
    eta_norm: np.ndarray         # (m,)
    mean_integrand: np.ndarray   # (m,)
    ratio: np.ndarray            # (m,), in [0, 1]
    hull_dist: np.ndarray        # (m,)
    passed_mask: np.ndarray      # (m,) bool
    eps_uhs: float

    @property
    def passed(self):
        return bool(self.passed_mask.all())

    @property
    def minima(self):
        return {
            "eta_norm": float(self.eta_norm.min()),
            "ratio": float(self.ratio.min()),
            "hull_dist": float(self.hull_dist.min()),
        }

    def failing_indices(self):
        return np.flatnonzero(~self.passed_mask)

    def worst_sample(self):
        """The failing witness: smallest hull distance, ties by field norm."""
        order = np.lexsort((self.eta_norm, self.hull_dist))
        return int(order[0])

    def as_dict(self):
        return {
            "region": self.region,
            "n_samples": int(self.samples.shape[0]),
            "passed": self.passed,
            "eps_uhs": self.eps_uhs,
            "minima": self.minima,
            "n_failing": int((~self.passed_mask).sum()),
            "worst_sample": self.samples[self.worst_sample()].tolist(),
        }


def _offdomain_quantities(problem, potential, x, beta, weights):
    u = u_values(problem, potential.psi, x)
    grads = np.stack(
        [problem.cost.grad_x(np.asarray(x)[None, :], y)[0] for y in problem.target.points]
    )
    integrands = (weights * u**-beta)[:, None] * grads
    eta = integrands.sum(axis=0)
    mean_norm = float(weights @ (u**-beta * np.linalg.norm(grads, axis=1)))
    return eta, mean_norm, grads


def _cellular_quantities(problem, potential, x, beta, tolerances, tie_tol):
    s = scores(problem, potential.psi, np.asarray(x, dtype=float))[0]
    phi = s.max()
    tied = np.flatnonzero(s >= phi - tie_tol)
    eta, _ = eta_cellular(problem, potential, x, beta, tolerances,
                          tie_tol=tie_tol, tied=tied)
    rows = cross_diff_gradients(problem, x, tied)
    proj = projector_from_rows(np.asarray(x, dtype=float), rows, tolerances.tol_rank)
    w = problem.target.averaging_weights()
    g0 = problem.cost.grad_x(np.asarray(x, dtype=float)[None, :], problem.target.points[int(tied[0])])[0]
    hull_vecs = []
    total = 0.0
    for i in range(problem.target.n_points):
        if i in tied:
            continue
        gap = float(phi - s[i])
        nu = 1.0
        for j in tied:
            nu *= float(np.linalg.norm(problem.target.points[i] - problem.target.points[j]))
        nu = min(1.0, nu)
        gi = problem.cost.grad_x(np.asarray(x, dtype=float)[None, :], problem.target.points[i])[0]
        vec = proj.projector @ (gi - g0)
        hull_vecs.append(vec)
        total += w[i] * (nu**beta) * gap**-beta * float(np.linalg.norm(vec))
    grads = np.stack(hull_vecs) if hull_vecs else np.zeros((0, problem.dim))
    return eta, total, grads


def uhs_check(problem, potential, samples, field_spec=None, tolerances=None):
    """Evaluate UHS quantities on region samples.

    Parameters
    ----------
    samples : (m, d) array
        Points of the named region (off-domain, or a stratum difference);
        an empty set is an error.
    field_spec : FieldSpec
        off-domain mode uses the cost gradients over all targets for the
        hull criterion; cellular mode uses the projected cross-difference
        gradients over non-tied targets.

    Returns
    -------
    UHSReport
    """
    from .fields import FieldSpec

    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("uhs_check needs a nonempty sample set")
    spec = field_spec or FieldSpec()
    tol = tolerances or problem.tolerances
    beta = spec.resolve_beta(problem.target)
    w = problem.target.averaging_weights()

    m = samples.shape[0]
    eta_norm = np.empty(m)
    mean_int = np.empty(m)
    hd = np.empty(m)
    for i, x in enumerate(samples):
        if spec.mode == "off_domain":
            eta, mean_norm, grads = _offdomain_quantities(problem, potential, x, beta, w)
        else:
            tie = tol.tol_tie
            if tie is None:
                tie = float(local_tie_gap(problem, potential.psi, x[None, :])[0])
            eta, mean_norm, grads = _cellular_quantities(
                problem, potential, x, beta, tol, tie)
        eta_norm[i] = float(np.linalg.norm(eta))
        mean_int[i] = mean_norm
        hd[i] = hull_distance(grads) if grads.shape[0] else 0.0

    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(mean_int > 0, eta_norm / mean_int, 0.0)
    ratio = np.clip(ratio, 0.0, 1.0)
    passed = (eta_norm >= tol.eps_uhs) & (hd > _HULL_ZERO)
    region = spec.mode if spec.stratum is None else f"Z_{spec.stratum}-Z_{spec.stratum+1}"
    return UHSReport(
        region=region, samples=samples, eta_norm=eta_norm,
        mean_integrand=mean_int, ratio=ratio, hull_dist=hd,
        passed_mask=passed, eps_uhs=tol.eps_uhs,
    )


def locate_field_zero(problem, potential, beta=None, n_candidates=50):
    """Grid-scan locator for a vanishing averaged field off the active domain.

    Scans off-domain cells for the smallest field norm among those whose
    cost-gradient hull contains the origin (the halfspace failure), then
    polishes the candidate to the zero of the averaged field by a damped
    finite-difference Newton iteration. Returns None when every off-domain
    cell has a hull separated from the origin.
    """
    from .dual import grid_phi
    from .fields import FieldSpec, eta_off_domain

    spec = FieldSpec("off_domain", beta)
    beta = spec.resolve_beta(problem.target)
    w = problem.target.averaging_weights()
    pts = problem.source.grid_points()
    phi = grid_phi(problem, potential.psi)
    X = pts[phi < 0]
    if X.shape[0] == 0:
        return None
    u = np.stack([problem.cost.eval(X, y) for y in problem.target.points], axis=1)
    u = u - potential.psi[None, :]
    grads = np.stack(
        [problem.cost.grad_x(X, y) for y in problem.target.points], axis=1)
    eta = ((w[None, :] * u**-beta)[:, :, None] * grads).sum(axis=1)
    order = np.argsort(np.linalg.norm(eta, axis=1))

    def eta_at(x):
        return eta_off_domain(problem, potential, x, beta)

    for k in order[:n_candidates]:
        gset = grads[k]
        if hull_distance(gset) != 0.0:
            continue
        x = X[k].copy()
        # polish to the zero of the field; saddles are fine for Newton
        for _ in range(30):
            v = eta_at(x)
            if np.linalg.norm(v) <= 1e-12:
                break
            h = 1e-7
            J = np.empty((x.size, x.size))
            for a in range(x.size):
                e = np.zeros(x.size)
                e[a] = h
                J[:, a] = (eta_at(x + e) - eta_at(x - e)) / (2 * h)
            try:
                step = np.linalg.solve(J, -v)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
            trial = x + np.clip(step, -0.05, 0.05)
            su = u_values(problem, potential.psi, trial)
            if su.min() <= 0:
                break
            x = trial
        g = np.stack([problem.cost.grad_x(x[None, :], y)[0]
                      for y in problem.target.points])
        if hull_distance(g) == 0.0 and u_values(problem, potential.psi, x).min() > 0:
            return x
        return X[k]
    return None


def sample_region(problem, potential, region, n, rng, stratum=None, margin=0.0):
    """Deterministically subsample grid cells of a named region.

    ``region`` is "offdomain" (u_min > margin) or "stratum" (cells of
    Z_j - Z_{j+1} for j = stratum). Returns at most n cell centers chosen
    by the given generator without replacement.
    """
    rng = np.random.default_rng(rng)
    pts = problem.source.grid_points()
    if region == "offdomain":
        phi = scores(problem, potential.psi, pts).max(axis=1)
        mask = phi < -margin
    elif region == "stratum":
        from .singularity import stratify

        if stratum is None or stratum < 1:
            raise ValueError("stratum region needs stratum >= 1")
        field = stratify(problem, potential)
        mask = field.stratum_mask(stratum) & ~field.stratum_mask(stratum + 1)
    else:
        raise ValueError(f"unknown region {region!r}")
    cells = np.flatnonzero(mask)
    if cells.size == 0:
        return pts[:0]
    if cells.size > n:
        cells = np.sort(rng.choice(cells, size=n, replace=False))
    return pts[cells]
