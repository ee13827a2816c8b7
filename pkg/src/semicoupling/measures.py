"""Source and target measures on a Euclidean box.

The source is a nonnegative density sampled by midpoint quadrature on a
regular grid; every integral over the box becomes a weighted sum over cell
centers. The target is a finite weighted point set, optionally carrying
quadrature weights when the points discretize a curve.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AbundanceError
from .validation import as_float_array, frozen


@dataclass(frozen=True)
class SourceMeasure:
    """Gridded density ``sigma`` on the box ``[lo_k, hi_k]^d``.

    Parameters
    ----------
    box_lo, box_hi : (d,) arrays
        Box corner coordinates, ``box_lo < box_hi`` per axis.
    resolution : (d,) int array
        Cells per axis, at least 2 per axis.
    density : (resolution...) array
        Nonnegative density sampled at cell centers.
    """

    box_lo: np.ndarray
    box_hi: np.ndarray
    resolution: tuple
    density: np.ndarray
    cell_volume: float = field(init=False)

    def __post_init__(self):
        lo = as_float_array(self.box_lo, "box_lo", ndim=1)
        hi = as_float_array(self.box_hi, "box_hi", ndim=1)
        if lo.shape != hi.shape:
            raise ValueError("box_lo and box_hi must have the same length")
        if np.any(hi <= lo):
            raise ValueError("box_hi must exceed box_lo on every axis")
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        if len(res) == 1 and lo.size > 1:
            res = res * lo.size
        if len(res) != lo.size:
            raise ValueError("resolution must give one entry per axis")
        if any(r < 2 for r in res):
            raise ValueError("resolution must be at least 2 per axis")
        dens = np.asarray(self.density, dtype=float)
        if dens.shape != res:
            raise ValueError(f"density shape {dens.shape} != resolution {res}")
        bad = ~np.isfinite(dens)
        if np.any(bad):
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValueError(f"non-finite density sample at cell {idx}")
        neg = dens < 0.0
        if np.any(neg):
            idx = tuple(int(i) for i in np.argwhere(neg)[0])
            raise ValueError(f"negative density sample at cell {idx}")
        object.__setattr__(self, "box_lo", frozen(lo))
        object.__setattr__(self, "box_hi", frozen(hi))
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "density", frozen(dens))
        spacing = (hi - lo) / np.asarray(res, dtype=float)
        object.__setattr__(self, "cell_volume", float(np.prod(spacing)))

    @property
    def dim(self):
        return self.box_lo.size

    @property
    def spacing(self):
        return (self.box_hi - self.box_lo) / np.asarray(self.resolution, dtype=float)

    @property
    def total_mass(self):
        return float(self.density.sum() * self.cell_volume)

    def axis_centers(self, axis):
        n = self.resolution[axis]
        h = (self.box_hi[axis] - self.box_lo[axis]) / n
        return self.box_lo[axis] + h * (np.arange(n) + 0.5)

    def grid_points(self):
        """Cell centers as an (n_cells, d) array in row-major cell order."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_weights(self):
        """Quadrature weight (mass) of every cell, flattened in grid order."""
        return self.density.ravel() * self.cell_volume


@dataclass(frozen=True)
class TargetMeasure:
    """Finite weighted point set ``(y_i, tau_i)``.

    ``quad_weights`` are optional quadrature weights used when the points
    discretize a positive-dimensional target such as a polyline.
    """

    points: np.ndarray
    masses: np.ndarray
    quad_weights: np.ndarray | None = None

    def __post_init__(self):
        pts = as_float_array(self.points, "points", ndim=2)
        masses = as_float_array(self.masses, "masses", ndim=1)
        if masses.size != pts.shape[0]:
            raise ValueError("one mass per target point required")
        if np.any(masses <= 0.0):
            raise ValueError("all target masses must be strictly positive")
        if pts.shape[0] > 1:
            diffs = pts[:, None, :] - pts[None, :, :]
            dist = np.sqrt((diffs**2).sum(-1))
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= 0.0:
                raise ValueError("target points must be pairwise distinct")
        qw = self.quad_weights
        if qw is not None:
            qw = as_float_array(qw, "quad_weights", ndim=1)
            if qw.size != pts.shape[0]:
                raise ValueError("one quadrature weight per target point required")
            if np.any(qw <= 0.0):
                raise ValueError("quadrature weights must be strictly positive")
            qw = frozen(qw)
        object.__setattr__(self, "points", frozen(pts))
        object.__setattr__(self, "masses", frozen(masses))
        object.__setattr__(self, "quad_weights", qw)

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def min_pairwise_distance(self):
        if self.n_points < 2:
            return np.inf
        diffs = self.points[:, None, :] - self.points[None, :, :]
        dist = np.sqrt((diffs**2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        return float(dist.min())

    def averaging_weights(self):
        """Normalized weights for target averages: quadrature if present, else uniform."""
        if self.quad_weights is not None:
            w = self.quad_weights / self.quad_weights.sum()
        else:
            w = np.full(self.n_points, 1.0 / self.n_points)
        return w

    @property
    def target_dim(self):
        """Dimension of the underlying target: 1 for quadrature curves, else 0."""
        return 1 if self.quad_weights is not None else 0


def make_source(box, resolution, density_fn):
    """Sample a density function on the cell centers of a regular grid.

    Parameters
    ----------
    box : pair of (d,) sequences
        Lower and upper corners.
    resolution : int or (d,) ints
        Cells per axis.
    density_fn : callable or float
        Either a constant or a callable mapping an (m, d) array of points
        to (m,) nonnegative values.

    Returns
    -------
    SourceMeasure
    """
    lo = as_float_array(box[0], "box_lo", ndim=1)
    hi = as_float_array(box[1], "box_hi", ndim=1)
    res = tuple(int(r) for r in np.atleast_1d(resolution))
    if len(res) == 1:
        res = res * lo.size
    probe = SourceMeasure(lo, hi, res, np.zeros(res))
    pts = probe.grid_points()
    if callable(density_fn):
        vals = np.asarray(density_fn(pts), dtype=float)
        vals = np.broadcast_to(vals, (pts.shape[0],)).reshape(res)
    else:
        vals = np.full(res, float(density_fn))
    return SourceMeasure(lo, hi, res, vals)


def check_abundance(source, target, tol=0.0):
    """Raise AbundanceError unless the source strictly dominates the target mass."""
    if target.total_mass >= source.total_mass - tol:
        raise AbundanceError(
            f"target mass {target.total_mass:.6g} must be strictly below "
            f"source mass {source.total_mass:.6g}"
        )
