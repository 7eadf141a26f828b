"""Figure builders: one per figure kind, with fixed sizes and color scales.

Sizes and dB ranges are deliberately hard-coded so figures from different
runs land on identical canvases and identical scales -- side-by-side
comparison is the whole point of regenerating these.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .formats import FormatError, read_grid_csv, read_isolation_csv, read_matrix_csv, read_peaks_csv

FIGURE_KINDS = ("matrix-heatmap", "isolation-heatmap", "range-velocity", "pas-surface")

DPI = 120
FIGSIZE = {
    "matrix-heatmap": (6.0, 5.0),
    "isolation-heatmap": (6.0, 5.0),
    "range-velocity": (7.0, 5.0),
    "pas-surface": (6.5, 5.0),
}
HEATMAP_DB_RANGE = (-60.0, 0.0)   # matrix magnitudes, maps, angular spectra
ISOLATION_DB_RANGE = (0.0, 60.0)  # link isolation


def _require_meta(meta: dict, keys, path) -> None:
    missing = [k for k in keys if k not in meta]
    if missing:
        raise FormatError(f"{path}: metadata missing {', '.join(missing)}")


def _axis_extent(start: float, step: float, count: int) -> tuple[float, float]:
    """imshow extent edges for a cell-centered axis."""
    return start - step / 2.0, start + step * (count - 1) + step / 2.0


def _annotate_peaks(ax, peaks, max_labels: int = 8) -> None:
    for k, (a, b, _p) in enumerate(peaks[:max_labels]):
        ax.plot(a, b, marker="x", color="white", markersize=9, markeredgewidth=2)
        ax.annotate(f"({a:.1f}, {b:.1f})", (a, b), textcoords="offset points",
                    xytext=(6, 6), color="white", fontsize=8)


def _matrix_heatmap(job, ax):
    m = read_matrix_csv(job.input)
    mag = np.abs(m)
    peak = mag.max()
    if peak <= 0:
        raise FormatError(f"{job.input}: all-zero matrix, nothing to scale against")
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / peak)
    im = ax.imshow(db, vmin=HEATMAP_DB_RANGE[0], vmax=HEATMAP_DB_RANGE[1],
                   cmap="viridis", origin="upper", interpolation="nearest", aspect="auto")
    ax.set_xlabel("column index")
    ax.set_ylabel("row index")
    return im, "|entry| (dB rel. max)", f"transfer matrix {m.shape[0]}x{m.shape[1]}"


def _isolation_heatmap(job, ax):
    iso = read_isolation_csv(job.input)
    im = ax.imshow(iso, vmin=ISOLATION_DB_RANGE[0], vmax=ISOLATION_DB_RANGE[1],
                   cmap="magma", origin="upper", interpolation="nearest", aspect="auto")
    ax.set_xlabel("column index (j)")
    ax.set_ylabel("row index (i)")
    return im, "isolation (dB)", f"link isolation {iso.shape[0]}x{iso.shape[1]}"


def _range_velocity(job, ax):
    power_db, meta = read_grid_csv(job.input)
    _require_meta(meta, ("range_start", "range_step", "vel_start", "vel_step"), job.input)
    n_vel, n_range = power_db.shape
    extent = (*_axis_extent(meta["range_start"], meta["range_step"], n_range),
              *_axis_extent(meta["vel_start"], meta["vel_step"], n_vel))
    im = ax.imshow(power_db, vmin=HEATMAP_DB_RANGE[0], vmax=HEATMAP_DB_RANGE[1],
                   cmap="viridis", origin="lower", extent=extent,
                   interpolation="nearest", aspect="auto")
    ax.set_xlabel("range (m)")
    ax.set_ylabel("radial velocity (m/s)")
    if job.peaks is not None:
        domain, peaks = read_peaks_csv(job.peaks)
        if domain != "range-velocity":
            raise FormatError(f"{job.peaks}: expected range-velocity peaks, got {domain}")
        _annotate_peaks(ax, peaks)
    return im, "power (dB rel. peak)", "range-velocity map"


def _pas_surface(job, ax):
    power, meta = read_grid_csv(job.input)
    _require_meta(meta, ("el_start", "el_step", "az_start", "az_step"), job.input)
    peak = power.max()
    if peak <= 0:
        raise FormatError(f"{job.input}: all-zero spectrum, nothing to scale against")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / peak)
    n_el, n_az = power.shape
    extent = (*_axis_extent(meta["az_start"], meta["az_step"], n_az),
              *_axis_extent(meta["el_start"], meta["el_step"], n_el))
    im = ax.imshow(db, vmin=HEATMAP_DB_RANGE[0], vmax=HEATMAP_DB_RANGE[1],
                   cmap="inferno", origin="lower", extent=extent,
                   interpolation="nearest", aspect="auto")
    ax.set_xlabel("azimuth (deg)")
    ax.set_ylabel("elevation (deg)")
    if job.peaks is not None:
        domain, peaks = read_peaks_csv(job.peaks)
        if domain != "angle":
            raise FormatError(f"{job.peaks}: expected angle peaks, got {domain}")
        # peaks store (elevation, azimuth); the surface plots azimuth on x
        _annotate_peaks(ax, [(az, el, p) for el, az, p in peaks])
    return im, "power (dB rel. peak)", "power angular spectrum"


_BUILDERS = {
    "matrix-heatmap": _matrix_heatmap,
    "isolation-heatmap": _isolation_heatmap,
    "range-velocity": _range_velocity,
    "pas-surface": _pas_surface,
}


def build_figure(job) -> plt.Figure:
    """Assemble the figure for a job without writing anything."""
    fig, ax = plt.subplots(figsize=FIGSIZE[job.kind])
    try:
        im, cbar_label, default_title = _BUILDERS[job.kind](job, ax)
    except Exception:
        plt.close(fig)
        raise
    fig.colorbar(im, ax=ax, label=cbar_label)
    ax.set_title(job.title if job.title else default_title)
    return fig


def render(job) -> str:
    """Render the job to its output image; returns the written path."""
    fig = build_figure(job)
    try:
        fig.savefig(job.output, dpi=DPI)
    finally:
        plt.close(fig)
    return job.output
