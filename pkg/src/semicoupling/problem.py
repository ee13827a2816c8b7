"""Problem bundle (source, target, cost) and numerical tolerances."""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .measures import SourceMeasure, TargetMeasure, check_abundance
from .validation import check_positive


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared across modules.

    ``tol_tie`` may be None, meaning the tie gap is derived per grid cell as
    ``10 * h * |grad phi|_local`` at stratification time; every other field
    must be strictly positive.
    """

    tol_mass: float = 1e-3
    tol_tie: float | None = None
    tol_rank: float = 1e-8
    tol_twist: float = 1e-8
    eps_stop: float = 1e-4
    eps_uhs: float = 1e-6
    max_flow_time: float = 1e3
    ode_rel_err: float = 1e-6

    def __post_init__(self):
        for name in ("tol_mass", "tol_rank", "tol_twist", "eps_stop",
                     "eps_uhs", "max_flow_time", "ode_rel_err"):
            check_positive(getattr(self, name), name)
        if self.tol_tie is not None:
            check_positive(self.tol_tie, "tol_tie")

    def replace(self, **kwargs):
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)


@dataclass(frozen=True)
class Problem:
    """An abundant transport instance: source density, finite target, cost."""

    source: SourceMeasure
    target: TargetMeasure
    cost: object
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.target.dim != self.source.dim:
            raise ValueError(
                f"target dim {self.target.dim} != source dim {self.source.dim}"
            )
        check_abundance(self.source, self.target)

    @property
    def dim(self):
        return self.source.dim

    def with_resolution(self, resolution):
        """Same problem with the density resampled on a new grid.

        Only densities constructed from a resample-able rule survive exactly;
        here the existing grid is nearest-neighbor resampled, which is exact
        for the constant and smooth densities this package ships.
        """
        from .measures import make_source

        src = self.source
        res = tuple(int(r) for r in np.atleast_1d(resolution))
        if len(res) == 1:
            res = res * src.dim

        def dens(points):
            idx = []
            for k in range(src.dim):
                h = (src.box_hi[k] - src.box_lo[k]) / src.resolution[k]
                j = np.clip(((points[:, k] - src.box_lo[k]) / h).astype(int),
                            0, src.resolution[k] - 1)
                idx.append(j)
            return src.density[tuple(idx)]

        new_src = make_source((src.box_lo, src.box_hi), res, dens)
        return Problem(new_src, self.target, self.cost, self.tolerances)

    def warn_tie_gap(self, tie_tol):
        """Warn when the tie tolerance is not small against the score spread."""
        if self.target.n_points < 2:
            return
        pts = self.source.grid_points()[:: max(1, np.prod(self.source.resolution) // 512)]
        costs = self.cost.pairwise(pts, self.target.points)
        costs = np.sort(costs, axis=1)
        spread = np.median(costs[:, 1] - costs[:, 0])
        if spread > 0 and tie_tol >= 0.5 * spread:
            warnings.warn(
                f"tie tolerance {tie_tol:.3g} is not small against the typical "
                f"score spread {spread:.3g}; strata may be over-thick",
                stacklevel=2,
            )
