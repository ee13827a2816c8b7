"""Nearest point to the origin in the convex hull of a finite point set.

Wolfe's min-norm-point algorithm: maintain a corral (affinely independent
subset), alternate between adding the point most violating optimality and
contracting back into the simplex when the affine minimizer leaves it.
Terminates in finitely many corrals; the loop guard is a safety net.
"""

import numpy as np


def _affine_min_norm(P):
    """Min-norm point of the affine hull of the rows of P; returns coefficients."""
    m = P.shape[0]
    G = P @ P.T
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = G
    A[:m, m] = 1.0
    A[m, :m] = 1.0
    b = np.zeros(m + 1)
    b[m] = 1.0
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return sol[:m]


def min_norm_point(points, tol=1e-10, max_iter=1000):
    """Nearest point to the origin in conv(points).

    Parameters
    ----------
    points : (n, d) array
    tol : float
        Relative optimality tolerance on the support-function gap.

    Returns
    -------
    x : (d,) array, the nearest point
    coeffs : (n,) array, convex coefficients with ``coeffs @ points = x``
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("points must be a nonempty (n, d) array")
    n = P.shape[0]
    norms = np.einsum("ij,ij->i", P, P)
    scale = max(1.0, float(norms.max()))

    active = [int(np.argmin(norms))]
    lam = np.array([1.0])
    x = P[active[0]].copy()

    for _ in range(max_iter):
        # optimality: <x, p> >= <x, x> - tol for every point
        dots = P @ x
        j = int(np.argmin(dots))
        if dots[j] >= float(x @ x) - tol * scale:
            break
        if j in active:
            break
        active.append(j)
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_min_norm(P[active])
            if np.all(alpha > 1e-14):
                lam = alpha
                break
            # contract toward the affine minimizer until a coefficient dies
            mask = alpha <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = np.where(mask, lam / (lam - alpha), np.inf)
            t = float(min(1.0, np.nanmin(theta)))
            lam = (1.0 - t) * lam + t * alpha
            keep = lam > 1e-14
            if keep.all():
                # numerical tie; drop the smallest coefficient
                keep[int(np.argmin(lam))] = False
            active = [a for a, k in zip(active, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[active]

    coeffs = np.zeros(n)
    for a, l in zip(active, lam):
        coeffs[a] += l
    return x, coeffs


def hull_distance(points, tol=1e-10):
    """Distance from the origin to conv(points); 0 when the hull contains it.

    Distances below the algorithm's resolution ``sqrt(tol * scale)`` are
    snapped to 0, with scale the largest squared point norm.
    """
    P = np.asarray(points, dtype=float)
    x, _ = min_norm_point(P, tol=tol)
    d = float(np.linalg.norm(x))
    scale = max(1.0, float(np.einsum("ij,ij->i", P, P).max()))
    return 0.0 if d <= np.sqrt(tol * scale) else d
