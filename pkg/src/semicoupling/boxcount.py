"""Box-counting dimension estimators for gridded point sets.

Two routes: refinement counting (cells occupied by a set as the grid is
refined; the route used by the stratum audits) and classic coarse-graining
of a single boolean mask. Both return the log-log slope with its fit
residual so callers can judge estimator noise.
"""

import numpy as np


def dimension_from_counts(scales, counts):
    """Slope of log(counts) against log(scales).

    ``scales`` are resolutions (boxes per axis), so a curve gives slope 1,
    an isolated cluster slope 0, a filled region slope d.

    Returns
    -------
    slope : float
    r2 : float
        Coefficient of determination of the log-log fit.
    """
    scales = np.asarray(scales, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if scales.size != counts.size or scales.size < 3:
        raise ValueError("need at least 3 (scale, count) pairs")
    if np.any(counts <= 0):
        raise ValueError("counts must be positive; empty sets have no dimension")
    x = np.log(scales)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(((y - fit) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def coarse_grain_counts(mask, sizes=None):
    """Occupied-box counts of a boolean mask at increasing box sizes.

    Boxes of side ``s`` tile the grid from its origin; a box counts when it
    contains any True cell. Default sizes are powers of two up to a quarter
    of the smallest axis.
    """
    mask = np.asarray(mask, dtype=bool)
    if sizes is None:
        smax = max(1, min(mask.shape) // 4)
        sizes = [2**k for k in range(int(np.log2(smax)) + 1)]
    counts = []
    for s in sizes:
        c = 0
        it = np.ndindex(*(int(np.ceil(n / s)) for n in mask.shape))
        for idx in it:
            sl = tuple(slice(i * s, (i + 1) * s) for i in idx)
            if mask[sl].any():
                c += 1
        counts.append(c)
    return np.asarray(sizes), np.asarray(counts)


def coarse_grain_dimension(mask, sizes=None):
    """Classic box-counting dimension of one mask: slope vs inverse box size."""
    sizes, counts = coarse_grain_counts(mask, sizes)
    keep = counts > 0
    return dimension_from_counts(1.0 / sizes[keep], counts[keep])
