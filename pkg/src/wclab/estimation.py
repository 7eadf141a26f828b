"""DUT-side sensing estimation: range-velocity maps, peak picking, delay-domain
target slicing, Bartlett power angular spectra, PSP scoring, and gain recovery.

Transform conventions: the dataset's delay phasor is exp(+j 2 pi f tau), so a
forward FFT over frequency lands targets at positive delay; the Doppler phasor
is exp(+j 2 pi nu t), so a forward FFT over time plus an fftshift gives a
velocity axis symmetric about zero. Both transforms are orthonormal, which
keeps total power identical between a CFR slice and its map.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .emulation import CfrDataset, Scenario
from .errors import DimensionError, ParameterError
from .geometry import C0, UpaGeometry, _lattice_axes, element_positions

WINDOWS = ("rectangular", "hann")


def _window(name: str, n: int) -> np.ndarray | None:
    if name == "rectangular":
        return None
    if name == "hann":
        return np.hanning(n)
    raise ParameterError(f"unknown window {name!r}; expected one of {WINDOWS}")


@dataclass(eq=False)
class RangeVelocityMap:
    """2-D power map in dB, normalized to 0 dB at its maximum.

    Rows follow the velocity axis, columns the range axis. peak_power_db is
    the absolute level of the map maximum, so absolute power of any cell is
    power_db + peak_power_db.
    """

    power_db: np.ndarray
    range_axis_m: np.ndarray
    velocity_axis_mps: np.ndarray
    zero_pad_factor: int
    peak_power_db: float


@dataclass(eq=False)
class PasGrid:
    """Power angular spectrum over an (elevation, azimuth) scan grid."""

    power: np.ndarray  # linear power, rows = elevation, cols = azimuth
    elevation_axis_deg: np.ndarray
    azimuth_axis_deg: np.ndarray
    grid_step_deg: float

    @property
    def normalized(self) -> np.ndarray:
        """Sum-to-one view of the grid (all-zero grids stay all-zero)."""
        total = float(np.sum(self.power))
        return self.power / total if total > 0 else self.power.copy()


@dataclass
class PeakList:
    """Detected peaks, strongest first.

    domain "range-velocity" holds (range_m, velocity_mps, power_db) tuples;
    domain "angle" holds (elevation_deg, azimuth_deg, power_db).
    """

    domain: str
    entries: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


def range_velocity_map(
    ds: CfrDataset,
    element_index: int,
    window: str = "rectangular",
    zero_pad: int = 4,
    max_range_m: float | None = None,
) -> RangeVelocityMap:
    """2-D transform of one element's (time, frequency) slice.

    Delay maps to range R = c tau / 2 and Doppler to v = nu lambda / 2. The
    optional max_range_m crops the range axis (applied between the two FFTs,
    which keeps large zero-padded maps affordable).
    """
    n_t, n_f, k = ds.values.shape
    if not 0 <= element_index < k:
        raise DimensionError(f"element_index {element_index} out of range 0..{k - 1}")
    if zero_pad < 1:
        raise ParameterError(f"zero_pad must be >= 1: {zero_pad}")
    x = ds.values[:, :, element_index]
    w_t = _window(window, n_t)
    w_f = _window(window, n_f)
    if w_t is not None:
        x = x * w_t[:, None] * w_f[None, :]
    n_fp = n_f * zero_pad
    n_tp = n_t * zero_pad
    df = float(ds.freq_axis_hz[1] - ds.freq_axis_hz[0])
    y = np.fft.fft(x, n=n_fp, axis=1, norm="ortho")
    range_axis = (C0 / 2.0) * np.arange(n_fp) / (n_fp * df)
    if max_range_m is not None:
        keep = range_axis <= max_range_m
        y = y[:, keep]
        range_axis = range_axis[keep]
    z = np.fft.fftshift(np.fft.fft(y, n=n_tp, axis=0, norm="ortho"), axes=0)
    lam = C0 / ds.carrier_hz
    velocity_axis = np.fft.fftshift(np.fft.fftfreq(n_tp, d=ds.snapshot_interval_s)) * lam / 2.0
    power = np.abs(z) ** 2
    peak = float(power.max())
    if peak > 0:
        with np.errstate(divide="ignore"):
            power_db = 10.0 * np.log10(power / peak)
        peak_power_db = 10.0 * math.log10(peak)
    else:
        power_db = np.full(power.shape, -np.inf)
        peak_power_db = -np.inf
    return RangeVelocityMap(
        power_db=power_db,
        range_axis_m=range_axis,
        velocity_axis_mps=velocity_axis,
        zero_pad_factor=zero_pad,
        peak_power_db=peak_power_db,
    )


def _parabolic_offset(y_minus: float, y_center: float, y_plus: float) -> tuple[float, float]:
    """Sub-bin offset and apex height gain from three dB samples."""
    denom = y_minus - 2.0 * y_center + y_plus
    if not np.isfinite(denom) or denom >= 0:
        return 0.0, 0.0
    delta = 0.5 * (y_minus - y_plus) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    apex_gain = -0.25 * (y_minus - y_plus) * delta
    return delta, float(apex_gain)


def _refine_peak(grid: np.ndarray, iv: int, ir: int) -> tuple[float, float, float]:
    """(velocity offset bins, range offset bins, dB gain) around a grid maximum."""
    dv = dr = 0.0
    gain = 0.0
    if 0 < iv < grid.shape[0] - 1:
        d, g = _parabolic_offset(grid[iv - 1, ir], grid[iv, ir], grid[iv + 1, ir])
        dv, gain = d, gain + g
    if 0 < ir < grid.shape[1] - 1:
        d, g = _parabolic_offset(grid[iv, ir - 1], grid[iv, ir], grid[iv, ir + 1])
        dr, gain = d, gain + g
    return dv, dr, gain


def detect_peaks(
    rv_map: RangeVelocityMap,
    max_peaks: int,
    min_separation_bins: int = 3,
    floor_db: float = -30.0,
) -> PeakList:
    """Greedy maxima with rectangular exclusion zones and parabolic refinement.

    floor_db is relative to the map maximum; reported powers are absolute
    (refined map value plus the map's peak reference). Ties go to the lower
    range, then the lower velocity. Separation is in map grid bins.
    """
    if max_peaks < 1:
        raise ParameterError(f"max_peaks must be >= 1: {max_peaks}")
    grid = rv_map.power_db
    available = np.isfinite(grid) & (grid >= floor_db)
    sep = int(min_separation_bins)
    entries = []
    for _ in range(max_peaks):
        if not available.any():
            break
        masked = np.where(available, grid, -np.inf)
        best = masked.max()
        cand = np.argwhere(masked == best)
        if len(cand) > 1:
            order = sorted(
                (tuple(rc) for rc in cand),
                key=lambda rc: (rv_map.range_axis_m[rc[1]], rv_map.velocity_axis_mps[rc[0]]),
            )
            iv, ir = order[0]
        else:
            iv, ir = cand[0]
        dv, dr, gain = _refine_peak(grid, iv, ir)
        r_step = rv_map.range_axis_m[1] - rv_map.range_axis_m[0] if rv_map.range_axis_m.size > 1 else 0.0
        v_step = rv_map.velocity_axis_mps[1] - rv_map.velocity_axis_mps[0] if rv_map.velocity_axis_mps.size > 1 else 0.0
        entries.append(
            (
                float(rv_map.range_axis_m[ir] + dr * r_step),
                float(rv_map.velocity_axis_mps[iv] + dv * v_step),
                float(grid[iv, ir] + gain + rv_map.peak_power_db),
            )
        )
        available[max(0, iv - sep):iv + sep + 1, max(0, ir - sep):ir + sep + 1] = False
    entries.sort(key=lambda e: (-e[2], e[0], e[1]))
    return PeakList(domain="range-velocity", entries=entries)


def target_slice_cir(
    ds: CfrDataset,
    range_m: float,
    window: str = "rectangular",
    velocity_hint_mps: float | None = None,
) -> np.ndarray:
    """Per-element CIR value at the delay bin nearest a target range.

    With a velocity hint the slice is Doppler-compensated and averaged
    coherently over all snapshots; without one it is taken at time index 0.
    """
    n_t, n_f, k = ds.values.shape
    df = float(ds.freq_axis_hz[1] - ds.freq_axis_hz[0])
    tau = 2.0 * range_m / C0
    rbin = int(round(tau * n_f * df))
    if rbin < 0 or rbin > n_f - 1:
        raise ParameterError(
            f"range {range_m} m is outside the unambiguous span "
            f"0..{(n_f - 1) * C0 / (2 * n_f * df):.1f} m"
        )
    w_f = _window(window, n_f)
    phasor = np.exp(-2j * np.pi * rbin * np.arange(n_f) / n_f) / np.sqrt(n_f)
    if w_f is not None:
        phasor = phasor * w_f
    y = np.einsum("tfk,f->tk", ds.values, phasor)
    if velocity_hint_mps is None:
        return y[0]
    nu = 2.0 * velocity_hint_mps * ds.carrier_hz / C0
    y = y * np.exp(-2j * np.pi * nu * ds.time_axis_s)[:, None]
    return y.mean(axis=0)


def bartlett_pas(
    h,
    geom: UpaGeometry,
    grid_step_deg: float = 1.0,
    steering: str = "two-way",
    carrier_hz: float = 3.5e9,
    elevation_range_deg: tuple[float, float] = (-60.0, 60.0),
    azimuth_range_deg: tuple[float, float] = (-60.0, 60.0),
) -> PasGrid:
    """Conventional beam-scan spectrum P = |a(theta)^H h|^2 / K^2.

    two-way steering squares each steering entry elementwise, matching the
    phase a monostatic element sees on a round trip; one-way matches a
    receive-only array.
    """
    if grid_step_deg <= 0:
        raise ParameterError(f"grid_step_deg must be > 0: {grid_step_deg}")
    if steering not in ("one-way", "two-way"):
        raise ParameterError(f"steering must be 'one-way' or 'two-way': {steering!r}")
    vec = np.asarray(h, dtype=complex).reshape(-1)
    k = geom.element_count
    if vec.size != k:
        raise DimensionError(f"slice has {vec.size} entries but array has {k}")
    el = np.arange(elevation_range_deg[0], elevation_range_deg[1] + grid_step_deg / 2, grid_step_deg)
    az = np.arange(azimuth_range_deg[0], azimuth_range_deg[1] + grid_step_deg / 2, grid_step_deg)
    el_r = np.radians(el)
    az_r = np.radians(az)
    ux = np.cos(el_r)[:, None] * np.sin(az_r)[None, :]
    uy = np.cos(el_r)[:, None] * np.cos(az_r)[None, :]
    uz = np.broadcast_to(np.sin(el_r)[:, None], ux.shape)
    h_ax, v_ax = _lattice_axes(geom)
    b = np.asarray(geom.boresight)
    rel = element_positions(geom) - np.asarray(geom.center_m)
    ph = rel @ h_ax
    pb = rel @ b
    pv = rel @ v_ax
    lam = C0 / carrier_hz
    phase = (2 * np.pi / lam) * (
        ux[:, :, None] * ph + uy[:, :, None] * pb + uz[:, :, None] * pv
    )
    a = np.exp(1j * phase)
    if steering == "two-way":
        a = a * a
    resp = np.einsum("eak,k->ea", np.conj(a), vec)
    return PasGrid(
        power=np.abs(resp) ** 2 / k**2,
        elevation_axis_deg=el,
        azimuth_axis_deg=az,
        grid_step_deg=grid_step_deg,
    )


def detect_pas_peaks(
    grid: PasGrid,
    max_peaks: int,
    min_separation_deg: float = 5.0,
    floor_db: float = -30.0,
) -> PeakList:
    """Greedy angular peaks with parabolic refinement, strongest first."""
    if max_peaks < 1:
        raise ParameterError(f"max_peaks must be >= 1: {max_peaks}")
    peak = float(grid.power.max())
    if peak <= 0:
        return PeakList(domain="angle", entries=[])
    with np.errstate(divide="ignore"):
        p_db = 10.0 * np.log10(grid.power / peak)
    ref_db = 10.0 * math.log10(peak)
    sep = max(1, int(round(min_separation_deg / grid.grid_step_deg)))
    available = np.isfinite(p_db) & (p_db >= floor_db)
    entries = []
    for _ in range(max_peaks):
        if not available.any():
            break
        masked = np.where(available, p_db, -np.inf)
        ie, ia = np.unravel_index(int(np.argmax(masked)), masked.shape)
        de, da, gain = _refine_peak(p_db, ie, ia)
        entries.append(
            (
                float(grid.elevation_axis_deg[ie] + de * grid.grid_step_deg),
                float(grid.azimuth_axis_deg[ia] + da * grid.grid_step_deg),
                float(p_db[ie, ia] + gain + ref_db),
            )
        )
        available[max(0, ie - sep):ie + sep + 1, max(0, ia - sep):ia + sep + 1] = False
    entries.sort(key=lambda e: (-e[2], e[0], e[1]))
    return PeakList(domain="angle", entries=entries)


def psp(p1: PasGrid, p2: PasGrid) -> float:
    """PAS similarity percentage: total-variation overlap of normalized grids."""
    if (
        p1.power.shape != p2.power.shape
        or not np.array_equal(p1.elevation_axis_deg, p2.elevation_axis_deg)
        or not np.array_equal(p1.azimuth_axis_deg, p2.azimuth_axis_deg)
    ):
        raise DimensionError("PAS grids do not share a common scan grid")
    return float((1.0 - 0.5 * np.sum(np.abs(p1.normalized - p2.normalized))) * 100.0)


@dataclass(frozen=True)
class GainEstimate:
    """One peak paired to one configured target, with re-referenced gain."""

    snapshot_index: int
    target_index: int
    range_m: float
    velocity_mps: float
    power_db: float
    gain_db: float


def pair_detections(detections, scenario: Scenario) -> list:
    """Pair detected range-velocity peaks to configured targets.

    detections is a list of (snapshot_index, PeakList) pairs. Within each
    snapshot, peaks pair greedily to targets by nearest (range, velocity) in
    bin units, with velocity distance wrapped at the unambiguous span so
    Nyquist-edge aliases pair correctly. Returns (snapshot_index,
    target_index, peak_entry) triples; warns when counts mismatch.
    """
    range_unit = C0 / (2.0 * scenario.bandwidth_hz)
    vel_unit = scenario.wavelength_m / (2.0 * scenario.num_time * scenario.snapshot_interval_s)
    span = scenario.wavelength_m / (2.0 * scenario.snapshot_interval_s)
    paired = []  # (snapshot_index, target_index, peak entry)
    for snap_idx, peaks in detections:
        _, targets = scenario.snapshots[snap_idx]
        if len(peaks) != len(targets):
            warnings.warn(
                f"snapshot {snap_idx}: {len(peaks)} peaks for {len(targets)} targets; "
                "pairing best-effort",
                UserWarning,
            )
        cand = []
        for ti, t in enumerate(targets):
            for pi, pk in enumerate(peaks):
                dr = (pk[0] - t.range_m) / range_unit
                dv = abs(pk[1] - t.radial_velocity_mps)
                dv = min(dv, span - dv) / vel_unit
                cand.append((math.hypot(dr, dv), ti, pi))
        cand.sort()
        used_t, used_p = set(), set()
        for _, ti, pi in cand:
            if ti in used_t or pi in used_p:
                continue
            used_t.add(ti)
            used_p.add(pi)
            paired.append((snap_idx, ti, peaks[pi]))
    return paired


def normalized_gain_estimate(detections, scenario: Scenario) -> list[GainEstimate]:
    """Re-reference detected peak powers to the scenario's strongest gain.

    detections is a list of (snapshot_index, PeakList) pairs, paired to
    targets as in pair_detections. The strongest paired peak is pinned to
    the strongest configured gain and every other estimate keeps its
    measured offset from that reference.
    """
    paired = pair_detections(detections, scenario)
    if not paired:
        raise ParameterError("no peaks supplied; nothing to estimate")
    max_cfg = max(
        scenario.snapshots[s][1][ti].gain_db for s, ti, _ in paired
    )
    max_raw = max(pk[2] for _, _, pk in paired)
    offset = max_cfg - max_raw
    out = [
        GainEstimate(
            snapshot_index=s,
            target_index=ti,
            range_m=pk[0],
            velocity_mps=pk[1],
            power_db=pk[2],
            gain_db=pk[2] + offset,
        )
        for s, ti, pk in paired
    ]
    out.sort(key=lambda e: (e.snapshot_index, e.target_index))
    return out


def _axis_step(axis: np.ndarray) -> float:
    return float(axis[1] - axis[0]) if axis.size > 1 else 0.0


def write_map_csv(rv_map: RangeVelocityMap, path) -> None:
    """Grid CSV: one metadata header line, then one row per velocity bin."""
    header = (
        f"# range_start={rv_map.range_axis_m[0]:.9e},"
        f"range_step={_axis_step(rv_map.range_axis_m):.9e},"
        f"vel_start={rv_map.velocity_axis_mps[0]:.9e},"
        f"vel_step={_axis_step(rv_map.velocity_axis_mps):.9e}\n"
    )
    with open(path, "w") as f:
        f.write(header)
        for row in rv_map.power_db:
            f.write(",".join(f"{v:.6f}" for v in row) + "\n")


def write_pas_csv(grid: PasGrid, path) -> None:
    """Grid CSV: one metadata header line, then one row per elevation step."""
    header = (
        f"# el_start={grid.elevation_axis_deg[0]:.9e},"
        f"el_step={_axis_step(grid.elevation_axis_deg):.9e},"
        f"az_start={grid.azimuth_axis_deg[0]:.9e},"
        f"az_step={_axis_step(grid.azimuth_axis_deg):.9e}\n"
    )
    with open(path, "w") as f:
        f.write(header)
        for row in grid.power:
            f.write(",".join(f"{v:.9e}" for v in row) + "\n")


def write_peaks_csv(peaks: PeakList, path) -> None:
    """Peak rows under a domain-appropriate header."""
    if peaks.domain == "range-velocity":
        header = "range_m,velocity_mps,power_db"
    elif peaks.domain == "angle":
        header = "elevation_deg,azimuth_deg,power_db"
    else:
        raise ParameterError(f"unknown peak domain {peaks.domain!r}")
    with open(path, "w") as f:
        f.write(header + "\n")
        for a, b, p in peaks:
            f.write(f"{a:.6f},{b:.6f},{p:.6f}\n")
