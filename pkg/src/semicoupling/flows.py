"""Blow-up flows realizing the deformation retracts.

The integrator follows the pole-seeking direction of an averaged field with
an embedded Cash-Karp 4(5) pair, a near-pole cap of 0.1 * gap / |field| on
the step size, and strict monotone decrease of the gap across accepted
steps. It stops when the gap falls below ``eps_stop`` and then refines the
endpoint by bisection until the gap is below ``eps_stop / 10``; the
accumulated flow time is the blow-up time omega.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
from sklearn.base import BaseEstimator

from .dual import scores
from .errors import PoleError, InactivePointError
from .fields import FieldSpec, eta_cellular, eta_off_domain, u_values
from .singularity import cross_diff_gradients, local_tie_gap, subdifferential
from .validation import check_points

TERMINATIONS = ("pole_reached", "max_time", "field_vanished")

# Cash-Karp embedded 4(5) tableau
_CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


class OffDomainField:
    """Pole-seeking field on X - A; the gap is ``u_min``."""

    mode = "off_domain"

    def __init__(self, problem, potential, beta=None, weights=None):
        self.problem = problem
        self.potential = potential
        self.beta = FieldSpec("off_domain", beta).resolve_beta(problem.target)
        self.weights = weights

    def direction(self, x):
        return -eta_off_domain(self.problem, self.potential, x, self.beta, self.weights)

    def gap(self, x):
        return float(u_values(self.problem, self.potential.psi, x).min())

    def u_min(self, x):
        return self.gap(x)

    def project(self, x):
        return x


class CellularField:
    """Pole-seeking tangent field on a stratum cell with a fixed tied set.

    The gap is the smallest tie slack ``c(x, y) - psi(y) + phi_S(x)`` over
    non-tied targets, with ``phi_S`` the best score within the tied set.
    After every accepted step the iterate is projected back onto the tie
    variety by damped Newton on the tie equations, to tolerance tie_tol/10.
    """

    mode = "cellular"

    def __init__(self, problem, potential, tied, beta=None, tolerances=None,
                 tie_tol=None, orders=None, weights=None):
        self.problem = problem
        self.potential = potential
        self.tied = np.asarray(tied, dtype=int)
        if self.tied.size < 2:
            raise InactivePointError("cellular field needs at least two tied targets")
        self.beta = FieldSpec("cellular", beta, stratum=1).resolve_beta(problem.target)
        self.tolerances = tolerances or problem.tolerances
        if tie_tol is None:
            tie_tol = self.tolerances.tol_tie
        self.tie_tol = tie_tol  # may stay None: resolved per point
        self.orders = orders
        self.weights = weights

    def _tie_tol_at(self, x):
        if self.tie_tol is not None:
            return float(self.tie_tol)
        return float(local_tie_gap(self.problem, self.potential.psi, np.asarray(x)[None, :])[0])

    def direction(self, x):
        v, _ = eta_cellular(
            self.problem, self.potential, x, self.beta, self.tolerances,
            tie_tol=self._tie_tol_at(x), tied=self.tied, orders=self.orders,
            weights=self.weights,
        )
        return -v

    def _slacks(self, x):
        s = scores(self.problem, self.potential.psi, np.asarray(x, dtype=float))[0]
        phi_s = s[self.tied].max()
        mask = np.ones(s.size, dtype=bool)
        mask[self.tied] = False
        return phi_s - s[mask]

    def gap(self, x):
        slacks = self._slacks(x)
        if slacks.size == 0:
            return np.inf
        return float(slacks.min())

    def u_min(self, x):
        return float(u_values(self.problem, self.potential.psi, x).min())

    def tie_residual(self, x):
        s = scores(self.problem, self.potential.psi, np.asarray(x, dtype=float))[0]
        vals = s[self.tied]
        return float(vals.max() - vals.min())

    def project(self, x):
        """Damped Newton back onto the tie variety of the fixed tied set.

        The tolerance is capped by eps_stop so endpoint accuracy is governed
        by the stop threshold, not by the (much coarser) tie-detection gap.
        """
        x = np.asarray(x, dtype=float).copy()
        tol = min(self._tie_tol_at(x) / 10.0, self.tolerances.eps_stop / 2.0)
        pts = self.problem.target.points
        psi = self.potential.psi
        for _ in range(25):
            s = scores(self.problem, psi, x)[0]
            f = s[self.tied[1:]] - s[self.tied[0]]
            if np.abs(f).max(initial=0.0) <= tol:
                return x
            rows = cross_diff_gradients(self.problem, x, self.tied)
            step, *_ = np.linalg.lstsq(-rows, -f, rcond=None)
            alpha = 1.0
            base = float(np.abs(f).max())
            while alpha > 2.0**-20:
                trial = x + alpha * step
                st = scores(self.problem, psi, trial)[0]
                ft = st[self.tied[1:]] - st[self.tied[0]]
                if np.abs(ft).max() < base:
                    x = trial
                    break
                alpha *= 0.5
            else:
                return x
        return x


@dataclass
class Trajectory:
    """Time-stamped flow curve from one seed."""

    seed: np.ndarray
    times: np.ndarray
    points: np.ndarray
    u_min: np.ndarray
    gaps: np.ndarray
    field_norms: np.ndarray
    omega: float
    terminated_by: str
    endpoint: np.ndarray = dc_field(init=False)

    def __post_init__(self):
        self.endpoint = self.points[-1]

    @property
    def n_samples(self):
        return self.times.size


def _ck_step(f, x, h):
    """One Cash-Karp step; returns (x5, err_vec) or raises PoleError."""
    k = [f(x)]
    for stage in range(1, 6):
        xi = x + h * sum(a * k[j] for j, a in enumerate(_CK_A[stage]))
        k.append(f(xi))
    x5 = x + h * sum(b * ki for b, ki in zip(_CK_B5, k))
    x4 = x + h * sum(b * ki for b, ki in zip(_CK_B4, k))
    return x5, x5 - x4


def _refine_segment(gap_fn, x_a, x_b, eps_target):
    """Bisect the segment [x_a, x_b] to a point with gap <= eps_target.

    Requires gap(x_a) > eps_target >= gap(x_b); returns (point, fraction).
    """
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if gap_fn(x_a + mid * (x_b - x_a)) <= eps_target:
            hi = mid
        else:
            lo = mid
    return x_a + hi * (x_b - x_a), hi


def _march_to_pole(field, x, eps_target):
    """March along the frozen field direction until the gap crosses eps_target."""
    v = field.direction(x)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return x, 0.0
    unit = v / nv
    g = field.gap(x)
    t_lo, t_hi = 0.0, max(g, 1e-300)
    for _ in range(200):
        if field.gap(x + t_hi * unit) <= eps_target:
            break
        t_lo = t_hi
        t_hi *= 2.0
    else:
        return x, 0.0
    for _ in range(80):
        tm = 0.5 * (t_lo + t_hi)
        if field.gap(x + tm * unit) <= eps_target:
            t_hi = tm
        else:
            t_lo = tm
    # remaining flow time along the tail, at the pre-refinement speed
    return x + t_hi * unit, t_hi / nv


def integrate_flow(field, x0, tolerances):
    """Integrate the pole-seeking flow from one seed.

    Parameters
    ----------
    field : object with direction(x), gap(x), u_min(x), project(x)
        ``direction`` must point toward the pole (decreasing gap).
    x0 : (d,) seed
    tolerances : Tolerances
        Uses eps_stop, eps_uhs, max_flow_time, ode_rel_err.

    Returns
    -------
    Trajectory

    Notes
    -----
    Seeds whose gap is already below eps_stop are returned unchanged with
    omega = 0 (identity on the retract target). A field norm below eps_uhs
    terminates with ``field_vanished``, the UHS failure witness.
    """
    x0 = np.asarray(x0, dtype=float)
    eps_stop = tolerances.eps_stop
    eps_target = eps_stop / 20.0
    rtol = tolerances.ode_rel_err

    times = [0.0]
    pts = [x0.copy()]
    gap = field.gap(x0)
    gaps = [gap]
    umins = [field.u_min(x0)]

    if gap <= eps_stop:
        return Trajectory(x0, np.array(times), np.array(pts), np.array(umins),
                          np.array(gaps), np.array([0.0]), 0.0, "pole_reached")

    try:
        v = field.direction(x0)
    except PoleError:
        v = np.zeros_like(x0)
    nv = float(np.linalg.norm(v))
    norms = [nv]
    if nv < tolerances.eps_uhs:
        return Trajectory(x0, np.array(times), np.array(pts), np.array(umins),
                          np.array(gaps), np.array(norms), 0.0, "field_vanished")

    t = 0.0
    x = x0.copy()
    h = 0.1 * gap / nv
    terminated = None
    rejects = 0
    max_rejects = 200

    def wrap(times, pts, umins, gaps, norms, omega, reason):
        return Trajectory(x0, np.asarray(times), np.asarray(pts), np.asarray(umins),
                          np.asarray(gaps), np.asarray(norms), omega, reason)

    while terminated is None:
        if t >= tolerances.max_flow_time:
            terminated = "max_time"
            break
        try:
            v = field.direction(x)
        except PoleError:
            terminated = "pole_reached"  # landed on the pole between checks
            break
        nv = float(np.linalg.norm(v))
        if nv < tolerances.eps_uhs:
            terminated = "field_vanished"
            break
        if rejects > max_rejects:
            terminated = "field_vanished"  # stalled: no monotone step exists
            break
        h = min(h, 0.1 * gap / nv, tolerances.max_flow_time - t)
        try:
            x_new, err = _ck_step(field.direction, x, h)
        except PoleError:
            h *= 0.5
            rejects += 1
            continue
        scale = rtol * max(1.0, float(np.abs(x).max()))
        err_ratio = float(np.abs(err).max()) / scale
        if err_ratio > 1.0:
            h *= max(0.9 * err_ratio**-0.25, 0.2)
            rejects += 1
            continue
        x_new = field.project(x_new)
        g_new = field.gap(x_new)
        if not np.isfinite(g_new) or g_new >= gap:
            h *= 0.5
            rejects += 1
            continue
        rejects = 0
        if g_new <= eps_stop:
            if g_new <= eps_target:
                endpoint, frac = _refine_segment(field.gap, x, x_new, eps_target)
                endpoint = field.project(endpoint)
                t += h * frac
            else:
                t += h
                endpoint, dt = _march_to_pole(field, x_new, eps_target)
                endpoint = field.project(endpoint)
                t += dt
            times.append(t)
            pts.append(endpoint)
            gaps.append(field.gap(endpoint))
            umins.append(field.u_min(endpoint))
            try:
                norms.append(float(np.linalg.norm(field.direction(endpoint))))
            except PoleError:
                norms.append(np.inf)
            return wrap(times, pts, umins, gaps, norms, t, "pole_reached")
        t += h
        x = x_new
        gap = g_new
        times.append(t)
        pts.append(x.copy())
        gaps.append(gap)
        umins.append(field.u_min(x))
        norms.append(nv)
        h *= min(5.0, max(0.2, 0.9 * (err_ratio + 1e-16) ** -0.2))

    return wrap(times, pts, umins, gaps, norms, t, terminated)


def reparameterize(trajectory, n_samples=33):
    """Resample a pole-reached trajectory at uniform fractions of omega.

    Returns (s, points) with s = linspace(0, 1, n_samples); the first point
    is the seed exactly and the last is the refined endpoint.
    """
    if trajectory.terminated_by != "pole_reached":
        raise ValueError(
            f"cannot reparameterize a {trajectory.terminated_by!r} trajectory"
        )
    s = np.linspace(0.0, 1.0, n_samples)
    if trajectory.omega == 0.0 or trajectory.n_samples == 1:
        pts = np.repeat(trajectory.points[:1], n_samples, axis=0)
        return s, pts
    t_query = s * trajectory.omega
    cols = [
        np.interp(t_query, trajectory.times, trajectory.points[:, k])
        for k in range(trajectory.points.shape[1])
    ]
    pts = np.stack(cols, axis=1)
    pts[0] = trajectory.points[0]
    pts[-1] = trajectory.points[-1]
    return s, pts


@dataclass
class RegionRetraction:
    """All trajectories from a seed set plus the omega field over seeds."""

    trajectories: list
    omega: np.ndarray
    terminations: list
    failures: list  # seed indices that did not reach the pole

    @property
    def ok(self):
        return not self.failures

    def neighbor_modulus(self):
        """max and median of |d omega| / |d seed| over nearest-neighbor pairs."""
        seeds = np.stack([tr.seed for tr in self.trajectories])
        good = np.asarray([tr.terminated_by == "pole_reached" for tr in self.trajectories])
        seeds = seeds[good]
        om = self.omega[good]
        if seeds.shape[0] < 2:
            return {"max": 0.0, "median": 0.0}
        diffs = seeds[:, None, :] - seeds[None, :, :]
        dist = np.sqrt((diffs**2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        nn = dist.argmin(axis=1)
        ratios = np.abs(om - om[nn]) / dist[np.arange(len(nn)), nn]
        return {"max": float(ratios.max()), "median": float(np.median(ratios))}


def retract_region(field_factory, seeds, tolerances):
    """Flow every seed; collect omegas and failure witnesses.

    ``field_factory(seed)`` builds the field for one seed (off-domain fields
    are seed-independent; cellular fields carry the seed's tied set).
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    trajectories = []
    terms = []
    fails = []
    omegas = np.empty(seeds.shape[0])
    for i, seed in enumerate(seeds):
        field = field_factory(seed)
        tr = integrate_flow(field, seed, tolerances)
        trajectories.append(tr)
        terms.append(tr.terminated_by)
        omegas[i] = tr.omega
        if tr.terminated_by != "pole_reached":
            fails.append(i)
    return RegionRetraction(trajectories, omegas, terms, fails)


class RetractionFlow(BaseEstimator):
    """Estimator facade: fit binds the problem and potential, transform flows seeds.

    Parameters
    ----------
    mode : {"offdomain", "cellular"}
    beta : float or None
        None resolves to dim(Y) + 2.
    stratum : int or None
        Cellular mode only; seeds must carry tied sets of size >= stratum + 1.

    Attributes
    ----------
    trajectories_ : list of Trajectory
    omega_ : ndarray
    terminations_ : list of str
    retraction_ : RegionRetraction
    """

    def __init__(self, mode="offdomain", beta=None, stratum=None,
                 eps_stop=None, eps_uhs=None, max_flow_time=None, ode_rel_err=None):
        self.mode = mode
        self.beta = beta
        self.stratum = stratum
        self.eps_stop = eps_stop
        self.eps_uhs = eps_uhs
        self.max_flow_time = max_flow_time
        self.ode_rel_err = ode_rel_err

    def _tolerances(self, problem):
        return problem.tolerances.replace(
            eps_stop=self.eps_stop, eps_uhs=self.eps_uhs,
            max_flow_time=self.max_flow_time, ode_rel_err=self.ode_rel_err,
        )

    def fit(self, problem, potential):
        if self.mode not in ("offdomain", "cellular"):
            raise ValueError("mode must be 'offdomain' or 'cellular'")
        self.problem_ = problem
        self.potential_ = potential
        self.tolerances_ = self._tolerances(problem)
        return self

    def _field_factory(self):
        problem, potential = self.problem_, self.potential_
        if self.mode == "offdomain":
            shared = OffDomainField(problem, potential, beta=self.beta)
            return lambda seed: shared
        tol = self.tolerances_

        def make(seed):
            tie = tol.tol_tie
            if tie is None:
                tie = float(local_tie_gap(problem, potential.psi, seed[None, :])[0])
            sub = subdifferential(problem, potential, seed, tie)
            return CellularField(problem, potential, sub.indices, beta=self.beta,
                                 tolerances=tol)

        return make

    def transform(self, seeds):
        seeds = check_points(seeds, self.problem_.dim, "seeds")
        retraction = retract_region(self._field_factory(), seeds, self.tolerances_)
        self.retraction_ = retraction
        self.trajectories_ = retraction.trajectories
        self.omega_ = retraction.omega
        self.terminations_ = retraction.terminations
        return np.stack([tr.endpoint for tr in retraction.trajectories])
