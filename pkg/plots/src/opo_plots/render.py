"""Figure rendering: heatmaps, line families, and polar maps.

All kinds read tidy (long-form) CSV columns.  Heatmap and polar kinds
require the two axis columns to form a complete rectangular grid; the
lines kind draws one curve of value-versus-x per distinct entry in the
y column.  Inseparability values are clamped to a fixed display range so
divergent antisqueezing cannot wash out the entanglement region, and the
I = 1 separability boundary is drawn as a contour on the gridded kinds.
"""

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvdata import column, pivot_grid, read_csv

# display names for the sweep CSV columns
AXIS_LABELS = {
    "delta": r"$\Delta$",
    "g": r"$g$",
    "R": r"$R$",
    "R_x": r"$R_x$",
    "R_y": r"$R_y$",
    "eta": r"$\eta$",
    "dphi": r"$\Delta\phi$",
    "theta": r"$\theta$",
    "tau": r"$\tau$",
    "I": r"$\mathcal{I}$",
    "I_sum": r"$\mathcal{I}_{+}$",
    "I_product": r"$\mathcal{I}_{\times}$",
    "nu_ppt": r"$\tilde\nu$",
}

KINDS = ("heatmap", "lines", "polar")
BOUNDARY_LEVEL = 1.0  # separability boundary of the inseparability degree


@dataclass(frozen=True)
class PlotJob:
    """One rendering request: input CSV, plot geometry, output image."""

    input: str
    kind: str
    x: str
    y: str
    out: str
    value: str = "I"
    title: str = ""
    clamp: tuple = (0.0, 1.2)

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; expected {KINDS}")
        if not self.clamp[0] < self.clamp[1]:
            raise ValueError(f"empty clamp range {self.clamp}")
        return self


def _label(name: str) -> str:
    return AXIS_LABELS.get(name, name)


def _boundary_contour(ax, x_axis, y_axis, grid, **kwargs):
    """Draw the value = 1 contour; returns True if any contour line exists."""
    cs = ax.contour(
        x_axis, y_axis, grid, levels=[BOUNDARY_LEVEL],
        colors="white", linewidths=1.2, linestyles="dashed", **kwargs
    )
    return any(len(path.vertices) for path in cs.get_paths())


def render(job: PlotJob) -> dict:
    """Render ``job`` to its output path; returns a rendering summary."""
    job.validate()
    data = read_csv(job.input)
    xs = column(data, job.x, job.input)
    ys = column(data, job.y, job.input)
    vals = column(data, job.value, job.input)

    fig = plt.figure(figsize=(5.0, 4.0), dpi=150)
    summary = {"kind": job.kind, "out": job.out, "rows": len(vals)}
    try:
        if job.kind == "lines":
            ax = fig.add_subplot()
            curves = sorted(set(ys))
            for yv in curves:
                pts = sorted(
                    (x, v) for x, y, v in zip(xs, ys, vals) if y == yv
                )
                ax.plot([x for x, _ in pts], [v for _, v in pts],
                        label=f"{_label(job.y)} = {yv:g}")
            ax.axhline(BOUNDARY_LEVEL, color="0.5", lw=0.8, ls="dashed")
            ax.set_xlabel(_label(job.x))
            ax.set_ylabel(_label(job.value))
            ax.set_ylim(*job.clamp)
            ax.legend(fontsize=8)
            summary["curves"] = len(curves)
        else:
            x_axis, y_axis, grid = pivot_grid(xs, ys, vals, job.input)
            g = np.array(grid)
            if job.kind == "heatmap":
                ax = fig.add_subplot()
                mesh = ax.pcolormesh(
                    x_axis, y_axis, g, shading="nearest", cmap="viridis",
                    vmin=job.clamp[0], vmax=job.clamp[1],
                )
                summary["contour"] = _boundary_contour(ax, x_axis, y_axis, g)
                ax.set_xlabel(_label(job.x))
                ax.set_ylabel(_label(job.y))
                fig.colorbar(mesh, ax=ax, label=_label(job.value))
            else:  # polar: x column azimuthal (radians), y column radial
                ax = fig.add_subplot(projection="polar")
                # close the azimuthal seam for display
                th = np.array(x_axis + [x_axis[0] + 2.0 * np.pi])
                gc = np.hstack([g, g[:, :1]])
                mesh = ax.pcolormesh(
                    th, y_axis, gc, shading="nearest", cmap="viridis",
                    vmin=job.clamp[0], vmax=job.clamp[1],
                )
                summary["contour"] = _boundary_contour(ax, th, y_axis, gc)
                fig.colorbar(mesh, ax=ax, label=_label(job.value))
            summary["x_extent"] = (min(x_axis), max(x_axis))
            summary["y_extent"] = (min(y_axis), max(y_axis))
        if job.title:
            fig.suptitle(job.title)
        fig.savefig(job.out)
    finally:
        plt.close(fig)
    return summary
