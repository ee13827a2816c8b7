"""Figure renderers for semicoupling run directories.

The domain figure is a full-bleed cell mask (no axes, no margins) so the
image maps the box one-to-one onto pixels; area fractions, and hence the
active-disk radius, can be measured straight off the raster. Strata, flow,
omega, and UHS figures are ordinary annotated axes.
"""

import os
from dataclasses import dataclass

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.lines import Line2D
from matplotlib.patches import Patch

from . import schemas

KINDS = ("domain", "strata", "flow", "omega", "uhs")

ACTIVE_RGB = (70, 130, 180)      # steelblue fill for A = Z_1
INACTIVE_RGB = (255, 255, 255)
STRATUM_COLORS = {2: "#d62728", 3: "#2ca02c"}  # Z_2 red, Z_3 green


@dataclass
class FigureSpec:
    """What to render: a run directory, a figure kind, pixel size, output path."""

    run_dir: str
    kind: str
    out_path: str
    size: int = 512
    dpi: int = 128

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not os.path.isdir(self.run_dir):
            raise FileNotFoundError(f"run directory not found: {self.run_dir}")


def _mask_image(active, shape):
    img = np.empty(shape + (3,), dtype=np.uint8)
    img[...] = INACTIVE_RGB
    img[active.reshape(shape)] = ACTIVE_RGB
    # array index 0 is x0: transpose so x0 runs along the horizontal axis
    return np.transpose(img, (1, 0, 2))


def _stratum_legend(present_strata, extra=()):
    handles = [Patch(facecolor=np.array(ACTIVE_RGB) / 255, label="Z_1 (active)")]
    for j in sorted(present_strata):
        if j in STRATUM_COLORS:
            handles.append(Patch(facecolor=STRATUM_COLORS[j], label=f"Z_{j}"))
    handles.extend(extra)
    return handles


def _new_axes_figure(spec):
    fig = Figure(figsize=(spec.size / spec.dpi * 1.3, spec.size / spec.dpi * 1.1),
                 dpi=spec.dpi)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    ax.set_aspect("equal")
    return fig, ax


def _save(fig, spec):
    fig.savefig(spec.out_path, dpi=spec.dpi)
    return spec.out_path


def _render_domain(spec):
    extent, shape, _, active, _, _ = schemas.load_strata(spec.run_dir)
    fig = Figure(figsize=(spec.size / spec.dpi, spec.size / spec.dpi), dpi=spec.dpi)
    FigureCanvasAgg(fig)
    ax = fig.add_axes([0.0, 0.0, 1.0, 1.0])
    ax.set_axis_off()
    ax.imshow(_mask_image(active, shape), origin="lower", extent=extent,
              interpolation="nearest", aspect="auto")
    return _save(fig, spec)


def _render_strata(spec):
    extent, shape, pts, active, _, rank = schemas.load_strata(spec.run_dir)
    fig, ax = _new_axes_figure(spec)
    ax.imshow(_mask_image(active, shape), origin="lower", extent=extent,
              interpolation="nearest")
    present = set()
    for j in (2, 3):
        sel = active & (rank + 1 == j) if j < 3 else active & (rank + 1 >= 3)
        if sel.any():
            present.add(j)
            ax.scatter(pts[sel, 0], pts[sel, 1], s=2.0,
                       color=STRATUM_COLORS[j], linewidths=0)
    ax.set_xlim(extent[0], extent[1])
    ax.set_ylim(extent[2], extent[3])
    ax.legend(handles=_stratum_legend(present), loc="upper right", fontsize=7)
    ax.set_title("singularity strata")
    return _save(fig, spec)


def _render_flow(spec):
    extent, shape, _, active, _, rank = schemas.load_strata(spec.run_dir)
    trajectories = schemas.load_trajectories(spec.run_dir)
    fig, ax = _new_axes_figure(spec)
    ax.imshow(_mask_image(active, shape), origin="lower", extent=extent,
              interpolation="nearest", alpha=0.5)
    present = set()
    for j in (2, 3):
        sel = active & (rank + 1 == j) if j < 3 else active & (rank + 1 >= 3)
        if sel.any():
            present.add(j)
    for t, xy, _ in trajectories:
        ax.plot(xy[:, 0], xy[:, 1], color="#444444", linewidth=0.7)
        ax.plot(xy[0, 0], xy[0, 1], marker="o", markersize=2.5,
                color="#1f77b4", linestyle="none")
        ax.plot(xy[-1, 0], xy[-1, 1], marker="x", markersize=3.0,
                color="#d62728", linestyle="none")
    extra = [
        Line2D([], [], marker="o", linestyle="none", color="#1f77b4",
               markersize=3, label="seeds"),
        Line2D([], [], marker="x", linestyle="none", color="#d62728",
               markersize=4, label="endpoints"),
    ]
    ax.set_xlim(extent[0], extent[1])
    ax.set_ylim(extent[2], extent[3])
    ax.legend(handles=_stratum_legend(present, extra), loc="upper right", fontsize=7)
    ax.set_title("retraction trajectories")
    return _save(fig, spec)


def _render_omega(spec):
    seeds, omega, terminated = schemas.load_omega(spec.run_dir)
    fig, ax = _new_axes_figure(spec)
    good = terminated == "pole_reached"
    if good.any():
        sca = ax.scatter(seeds[good, 0], seeds[good, 1], c=omega[good],
                         cmap="viridis", s=14)
        fig.colorbar(sca, ax=ax, label="omega")
    if (~good).any():
        ax.scatter(seeds[~good, 0], seeds[~good, 1], marker="x",
                   color="#d62728", s=18, label="not pole_reached")
        ax.legend(loc="upper right", fontsize=7)
    ax.set_title("blow-up time over seeds")
    return _save(fig, spec)


def _render_uhs(spec):
    pts, hull, passed = schemas.load_uhs(spec.run_dir)
    fig, ax = _new_axes_figure(spec)
    if passed.any():
        ax.scatter(pts[passed, 0], pts[passed, 1], c=hull[passed],
                   cmap="viridis", s=12, label="passed (hull distance)")
    if (~passed).any():
        ax.scatter(pts[~passed, 0], pts[~passed, 1], marker="x",
                   color="#d62728", s=20, label="failed")
    ax.legend(loc="upper right", fontsize=7)
    ax.set_title("UHS samples")
    return _save(fig, spec)


_RENDERERS = {
    "domain": _render_domain,
    "strata": _render_strata,
    "flow": _render_flow,
    "omega": _render_omega,
    "uhs": _render_uhs,
}


def render(spec: FigureSpec):
    """Render one figure kind from a run directory; returns the output path."""
    return _RENDERERS[spec.kind](spec)
