"""Transport cost models with gradients and Hessians in the source variable.

Costs are evaluated in batch over source points for a fixed target point.
Built-in kinds: the quadratic cost ``|x - y|^2 / 2`` and a log-repulsive
cost ``-log|x - y| + offset`` whose pole at ``x = y`` keeps the cost out of
its own domain there. A user-supplied kind accepts callables and fills in
missing derivatives by central finite differences.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomainError
from .validation import check_points


class CostModel:
    """Base interface: ``eval``/``grad_x`` are batched over x, ``hess_x`` is pointwise."""

    kind = "user-supplied"

    def eval(self, X, y):
        raise NotImplementedError

    def grad_x(self, X, y):
        raise NotImplementedError

    def hess_x(self, x, y):
        raise NotImplementedError

    def pairwise(self, X, points):
        """Cost matrix (m, n) for m source points against n target points."""
        X = np.asarray(X, dtype=float)
        cols = [self.eval(X, y) for y in points]
        return np.stack(cols, axis=1)

    def check_domain(self, x, y):
        """Raise OutOfDomainError if (x, y) is outside the declared domain."""
        return None


class QuadraticCost(CostModel):
    """Euclidean quadratic cost ``|x - y|^2 / 2``."""

    kind = "quadratic"

    def eval(self, X, y):
        d = np.asarray(X, dtype=float) - np.asarray(y, dtype=float)
        return 0.5 * np.einsum("...k,...k->...", d, d)

    def grad_x(self, X, y):
        return np.asarray(X, dtype=float) - np.asarray(y, dtype=float)

    def hess_x(self, x, y):
        return np.eye(np.asarray(x).shape[-1])


class LogRepulsiveCost(CostModel):
    """Repulsive cost ``-log|x - y| + offset``, undefined at ``x = y``.

    The offset keeps the cost nonnegative on a bounded box; ``offset =
    log(diam(box))`` suffices since ``|x - y| <= diam``. Batched evaluation
    returns ``+inf`` at an exact pole so sup/argmax reductions stay usable;
    the pointwise domain check raises instead.
    """

    kind = "log-repulsive"

    def __init__(self, offset):
        self.offset = float(offset)

    def _r2(self, X, y):
        d = np.asarray(X, dtype=float) - np.asarray(y, dtype=float)
        return np.einsum("...k,...k->...", d, d), d

    def eval(self, X, y):
        r2, _ = self._r2(X, y)
        with np.errstate(divide="ignore"):
            return -0.5 * np.log(r2) + self.offset

    def grad_x(self, X, y):
        r2, d = self._r2(X, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -d / r2[..., None]

    def hess_x(self, x, y):
        r2, d = self._r2(x, y)
        if r2 == 0.0:
            raise OutOfDomainError("log-repulsive cost has a pole at x = y")
        dim = np.asarray(x).shape[-1]
        return -np.eye(dim) / r2 + 2.0 * np.outer(d, d) / r2**2

    def check_domain(self, x, y):
        r2, _ = self._r2(x, y)
        if np.any(r2 == 0.0):
            raise OutOfDomainError("log-repulsive cost has a pole at x = y")


class UserCost(CostModel):
    """Wrap user callables; missing derivatives fall back to central differences.

    ``fn(X, y)`` must map an (m, d) batch and a (d,) target to (m,) values.
    """

    kind = "user-supplied"

    def __init__(self, fn, grad=None, hess=None, fd_step=1e-6):
        self.fn = fn
        self._grad = grad
        self._hess = hess
        self.fd_step = float(fd_step)

    def eval(self, X, y):
        return np.asarray(self.fn(np.asarray(X, dtype=float), np.asarray(y, dtype=float)), dtype=float)

    def grad_x(self, X, y):
        if self._grad is not None:
            return np.asarray(self._grad(np.asarray(X, dtype=float), y), dtype=float)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        h = self.fd_step
        cols = []
        for k in range(X.shape[1]):
            e = np.zeros(X.shape[1])
            e[k] = h
            cols.append((self.eval(X + e, y) - self.eval(X - e, y)) / (2.0 * h))
        return np.stack(cols, axis=-1)

    def hess_x(self, x, y):
        if self._hess is not None:
            return np.asarray(self._hess(np.asarray(x, dtype=float), y), dtype=float)
        x = np.asarray(x, dtype=float)
        h = max(self.fd_step, 1e-5)
        rows = []
        for k in range(x.size):
            e = np.zeros(x.size)
            e[k] = h
            gp = self.grad_x(x[None, :] + e, y)[0]
            gm = self.grad_x(x[None, :] - e, y)[0]
            rows.append((gp - gm) / (2.0 * h))
        H = np.stack(rows, axis=0)
        return 0.5 * (H + H.T)


def make_cost(kind, **params):
    if kind == "quadratic":
        return QuadraticCost()
    if kind in ("log-repulsive", "log_repulsive"):
        return LogRepulsiveCost(offset=params["offset"])
    raise ValueError(f"unknown cost kind {kind!r}")


def cost_eval(cost, x, y):
    """Pointwise cost value; raises OutOfDomainError at a declared pole."""
    cost.check_domain(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return float(cost.eval(np.asarray(x, dtype=float)[None, :], y)[0])


def cost_grad_x(cost, x, y):
    cost.check_domain(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return np.asarray(cost.grad_x(np.asarray(x, dtype=float)[None, :], y)[0], dtype=float)


def cost_hess_x(cost, x, y):
    cost.check_domain(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return np.asarray(cost.hess_x(np.asarray(x, dtype=float), y), dtype=float)


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str
    witness: object = None


@dataclass
class AssumptionReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            c.name: {"passed": c.passed, "detail": c.detail, "witness": _jsonable(c.witness)}
            for c in self.checks
        }


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return [_jsonable(o) for o in obj]
    return obj


def _finite_rows(cost, X, y):
    vals = cost.eval(X, y)
    return np.isfinite(vals), vals


def audit_assumptions(cost, source, target, tolerances, n_samples=64, rng=None):
    """Numerical audit of the cost assumptions (A0)-(A5) on sampled points.

    Checks, each reported with a witness on failure:

    - A0: cost finite (or +inf at poles only) and bounded below by 0 at box
      corners and random interior samples.
    - A1: gradient and Hessian exist, are finite, the Hessian is symmetric,
      and its norm is bounded over the samples.
    - A3: ``x -> c(x, y)`` is not locally constant (max gradient norm per
      target above tol_twist).
    - A4 (Twist): for each sampled x, the map ``y_i -> grad_x c(x, y_i)`` is
      injective within tol_twist over all target pairs.
    - A5: central differences of ``y -> c(x, y)`` are finite and step-halving
      consistent; gradient norms in y bounded over the samples.
    """
    rng = np.random.default_rng(rng)
    d = source.dim
    lo, hi = source.box_lo, source.box_hi
    corners = np.stack(
        [np.where(bits, hi, lo) for bits in np.ndindex(*(2,) * d)], axis=0
    ).astype(float)
    interior = lo + (hi - lo) * rng.random((n_samples, d))
    samples = np.vstack([corners, interior])
    # keep audit points off the repulsive poles
    for y in target.points:
        r = np.sqrt(((samples - y) ** 2).sum(1))
        samples = samples[r > 1e-9]

    checks = []
    tol_twist = tolerances.tol_twist

    # (A0) lower bound and finiteness away from poles
    worst = (0.0, None)
    a0_ok = True
    for y in target.points:
        vals = cost.eval(samples, y)
        if np.any(np.isnan(vals)) or np.any(vals == -np.inf):
            a0_ok = False
            worst = (float("nan"), (samples[int(np.argmax(~np.isfinite(vals)))], y))
            break
        low = vals[np.isfinite(vals)].min(initial=np.inf)
        if low < -1e-12:
            a0_ok = False
            worst = (float(low), (samples[int(np.argmin(vals))], y))
            break
    checks.append(
        AssumptionCheck(
            "A0", a0_ok,
            "cost bounded below by 0 on corners and samples" if a0_ok
            else f"cost dips to {worst[0]:.3g}", worst[1],
        )
    )

    # (A1) derivatives exist, Hessian finite, symmetric, bounded
    a1_ok = True
    a1_detail = ""
    a1_wit = None
    hess_norm = 0.0
    sub = samples[:: max(1, len(samples) // 16)]
    for y in target.points:
        grads = cost.grad_x(sub, y)
        if not np.all(np.isfinite(grads)):
            a1_ok, a1_detail = False, "non-finite gradient"
            a1_wit = (sub[int(np.argmax(~np.isfinite(grads).all(1)))], y)
            break
        for x in sub:
            H = cost.hess_x(x, y)
            if not np.all(np.isfinite(H)):
                a1_ok, a1_detail, a1_wit = False, "non-finite Hessian", (x, y)
                break
            if np.abs(H - H.T).max() > 1e-10:
                a1_ok, a1_detail, a1_wit = False, "asymmetric Hessian", (x, y)
                break
            hess_norm = max(hess_norm, float(np.linalg.norm(H, 2)))
        if not a1_ok:
            break
    if a1_ok:
        a1_detail = f"max Hessian spectral norm {hess_norm:.3g} over samples"
    checks.append(AssumptionCheck("A1", a1_ok, a1_detail, a1_wit))

    # (A3) non-constancy of x -> c(x, y)
    a3_ok = True
    a3_wit = None
    for i, y in enumerate(target.points):
        gnorm = np.linalg.norm(cost.grad_x(samples, y), axis=1)
        if gnorm.max(initial=0.0) <= tol_twist:
            a3_ok, a3_wit = False, (int(i), y)
            break
    checks.append(
        AssumptionCheck(
            "A3", a3_ok,
            "gradients nonvanishing for every target" if a3_ok
            else "x -> c(x, y) numerically constant", a3_wit,
        )
    )

    # (A4) twist injectivity over sampled pairs
    a4_ok = True
    a4_wit = None
    if target.n_points >= 2:
        for x in sub:
            grads = np.stack([cost.grad_x(x[None, :], y)[0] for y in target.points])
            diff = grads[:, None, :] - grads[None, :, :]
            dist = np.linalg.norm(diff, axis=2)
            iu = np.triu_indices(target.n_points, k=1)
            k = int(np.argmin(dist[iu]))
            if dist[iu][k] <= tol_twist:
                a4_ok = False
                a4_wit = (x, int(iu[0][k]), int(iu[1][k]))
                break
    checks.append(
        AssumptionCheck(
            "A4", a4_ok,
            "grad_x c(x, .) injective on sampled pairs" if a4_ok
            else "equal gradients for two distinct targets", a4_wit,
        )
    )

    # (A5) differentiability in y by step-halved central differences
    a5_ok = True
    a5_wit = None
    gymax = 0.0
    hy = 1e-4
    for y in target.points:
        for x in sub[:4]:
            g1 = np.zeros(d)
            g2 = np.zeros(d)
            for k in range(d):
                e = np.zeros(d)
                e[k] = 1.0
                c = lambda yy: cost.eval(x[None, :], yy)[0]
                g1[k] = (c(y + hy * e) - c(y - hy * e)) / (2 * hy)
                g2[k] = (c(y + 0.5 * hy * e) - c(y - 0.5 * hy * e)) / hy
            if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
                a5_ok, a5_wit = False, (x, y)
                break
            scale = max(1.0, np.linalg.norm(g1))
            if np.linalg.norm(g1 - g2) / scale > 1e-3:
                a5_ok, a5_wit = False, (x, y)
                break
            gymax = max(gymax, float(np.linalg.norm(g2)))
        if not a5_ok:
            break
    checks.append(
        AssumptionCheck(
            "A5", a5_ok,
            f"y-derivative consistent, max |grad_y c| = {gymax:.3g}" if a5_ok
            else "y-derivative inconsistent or non-finite", a5_wit,
        )
    )
    return AssumptionReport(checks)
