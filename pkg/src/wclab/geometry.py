"""Planar-array geometry, element patterns, steering, and transfer-matrix synthesis.

Coordinate convention: the device under test sits with its array plane facing
+y (boresight), azimuth measured toward +x and elevation toward +z. A uniform
planar array lays its elements on a centered rectangular lattice in the plane
orthogonal to boresight, indexed row-major with row 0 at the bottom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GeometryError, ParameterError

C0 = 299_792_458.0


@dataclass(frozen=True)
class Direction:
    """Elevation/azimuth pair, degrees; boresight is (0, 0)."""

    elevation_deg: float
    azimuth_deg: float

    def __post_init__(self):
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ParameterError(f"elevation_deg out of [-90, 90]: {self.elevation_deg}")
        if not -180.0 <= self.azimuth_deg <= 180.0:
            raise ParameterError(f"azimuth_deg out of [-180, 180]: {self.azimuth_deg}")

    def unit_vector(self) -> np.ndarray:
        """Propagation direction in the array frame (x toward azimuth, z up)."""
        el = math.radians(self.elevation_deg)
        az = math.radians(self.azimuth_deg)
        return np.array(
            [math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el)]
        )


@dataclass(frozen=True)
class RadiationPattern:
    """cos^q element pattern with a uniform leakage floor.

    exponent_q = 14 approximates a narrow waveguide element (HPBW ~ 25 deg),
    q = 2 a wide patch-like element (HPBW ~ 66 deg).
    """

    exponent_q: float
    floor_gain: float = 0.01

    def __post_init__(self):
        if self.exponent_q < 0:
            raise ParameterError(f"exponent_q must be >= 0: {self.exponent_q}")
        if self.floor_gain < 0:
            raise ParameterError(f"floor_gain must be >= 0: {self.floor_gain}")


@dataclass(frozen=True)
class UpaGeometry:
    """Uniform planar array: rows stack vertically, columns run horizontally."""

    rows: int
    cols: int
    spacing_m: float
    center_m: tuple[float, float, float] = (0.0, 0.0, 0.0)
    boresight: tuple[float, float, float] = (0.0, 1.0, 0.0)
    pattern: RadiationPattern = field(default_factory=lambda: RadiationPattern(14.0))

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ParameterError(f"rows/cols must be >= 1: {self.rows}x{self.cols}")
        if self.spacing_m <= 0:
            raise ParameterError(f"spacing_m must be > 0: {self.spacing_m}")
        b = np.asarray(self.boresight, dtype=float)
        norm = np.linalg.norm(b)
        if norm == 0 or not np.all(np.isfinite(b)):
            raise ParameterError("boresight must be a nonzero finite vector")
        object.__setattr__(self, "boresight", tuple(b / norm))

    @property
    def element_count(self) -> int:
        return self.rows * self.cols


def _canonical_sign(vec: np.ndarray) -> np.ndarray:
    """Flip so the largest-magnitude component is positive (deterministic axes)."""
    k = int(np.argmax(np.abs(vec)))
    return -vec if vec[k] < 0 else vec


def _lattice_axes(geom: UpaGeometry) -> tuple[np.ndarray, np.ndarray]:
    """In-plane horizontal and vertical unit axes for the array lattice.

    Axes are sign-canonicalized so two arrays facing each other (boresights
    +y and -y) share identical lattice axes and are index-aligned element
    for element.
    """
    b = np.asarray(geom.boresight)
    z = np.array([0.0, 0.0, 1.0])
    v0 = z - np.dot(z, b) * b
    if np.linalg.norm(v0) < 1e-12:  # boresight along z; seed from y instead
        y = np.array([0.0, 1.0, 0.0])
        v0 = y - np.dot(y, b) * b
    v = _canonical_sign(v0 / np.linalg.norm(v0))
    h0 = np.cross(v, b)
    h = _canonical_sign(h0 / np.linalg.norm(h0))
    return h, v


def element_positions(geom: UpaGeometry) -> np.ndarray:
    """(K, 3) lattice positions, row-major from the bottom row; centroid = center."""
    h, v = _lattice_axes(geom)
    r = np.arange(geom.rows) - (geom.rows - 1) / 2.0
    c = np.arange(geom.cols) - (geom.cols - 1) / 2.0
    rr, cc = np.meshgrid(r, c, indexing="ij")
    offsets = geom.spacing_m * (cc.reshape(-1, 1) * h + rr.reshape(-1, 1) * v)
    return np.asarray(geom.center_m) + offsets


def steering_vector(geom: UpaGeometry, direction: Direction, freq_hz: float) -> np.ndarray:
    """Unit-modulus phase signature of a plane wave from `direction`.

    Phase of element k is +(2*pi/lambda) <p_k - center, u>, with u resolved in
    the array-local frame (boresight = local +y). Transmit and receive
    signatures are identical (every element both transmits and receives).
    """
    if freq_hz <= 0:
        raise ParameterError(f"freq_hz must be > 0: {freq_hz}")
    lam = C0 / freq_hz
    h, v = _lattice_axes(geom)
    b = np.asarray(geom.boresight)
    ux, uy, uz = direction.unit_vector()
    u_global = ux * h + uy * b + uz * v
    rel = element_positions(geom) - np.asarray(geom.center_m)
    phase = (2 * math.pi / lam) * (rel @ u_global)
    return np.exp(1j * phase)


def pattern_gain(p: RadiationPattern, off_boresight_deg):
    """Amplitude gain at an off-boresight angle in [0, 180] degrees."""
    angle = np.asarray(off_boresight_deg, dtype=float)
    if np.any(angle < 0) or np.any(angle > 180):
        raise ParameterError("off-boresight angle must lie in [0, 180] degrees")
    front = np.cos(np.radians(np.minimum(angle, 90.0))) ** p.exponent_q
    gain = np.where(angle <= 90.0, np.maximum(front, p.floor_gain), p.floor_gain)
    return float(gain) if np.isscalar(off_boresight_deg) else gain


def synthesize_transfer_matrix(
    dut: UpaGeometry, probe: UpaGeometry, freq_hz: float
) -> np.ndarray:
    """Probe->DUT transfer matrix from per-element spherical-wave propagation.

    Entry (i, j) couples probe element j into DUT element i:
    g_dut(alpha_ij) * g_probe(beta_ij) * (lambda / 4 pi d_ij) * exp(-j 2 pi d_ij / lambda),
    where d_ij is the exact 3-D element separation and alpha/beta are each
    element's off-boresight angles toward the other. Valid in the array near
    field but element far field; separations below lambda/10 are rejected.
    """
    if freq_hz <= 0:
        raise ParameterError(f"freq_hz must be > 0: {freq_hz}")
    if dut.element_count != probe.element_count:
        raise DimensionError(
            f"element counts differ: dut {dut.element_count}, probe {probe.element_count}"
        )
    lam = C0 / freq_hz
    dut_pos = element_positions(dut)
    probe_pos = element_positions(probe)
    diff = probe_pos[np.newaxis, :, :] - dut_pos[:, np.newaxis, :]  # (K, K, 3)
    d = np.linalg.norm(diff, axis=2)
    if np.any(d < lam / 10):
        raise GeometryError(
            f"element separation {d.min():.4g} m is inside the reactive near field "
            f"(< lambda/10 = {lam / 10:.4g} m)"
        )
    cos_alpha = np.clip((diff @ np.asarray(dut.boresight)) / d, -1.0, 1.0)
    cos_beta = np.clip((-diff @ np.asarray(probe.boresight)) / d, -1.0, 1.0)
    g_dut = pattern_gain(dut.pattern, np.degrees(np.arccos(cos_alpha)))
    g_probe = pattern_gain(probe.pattern, np.degrees(np.arccos(cos_beta)))
    return g_dut * g_probe * (lam / (4 * math.pi * d)) * np.exp(-2j * math.pi * d / lam)


def face_to_face_pair(
    rows: int,
    cols: int,
    spacing_m: float,
    standoff_m: float,
    pattern: RadiationPattern | None = None,
    probe_pattern: RadiationPattern | None = None,
) -> tuple[UpaGeometry, UpaGeometry]:
    """DUT at the origin facing +y and an identical probe array facing it."""
    pat = pattern if pattern is not None else RadiationPattern(14.0)
    dut = UpaGeometry(rows=rows, cols=cols, spacing_m=spacing_m, pattern=pat)
    probe = UpaGeometry(
        rows=rows,
        cols=cols,
        spacing_m=spacing_m,
        center_m=(0.0, standoff_m, 0.0),
        boresight=(0.0, -1.0, 0.0),
        pattern=probe_pattern if probe_pattern is not None else pat,
    )
    return dut, probe


def assemble_synthetic_matrix(blocks) -> np.ndarray:
    """Stitch a grid of equal-size square sub-matrices into one large matrix.

    Block (r, c) — DUT aperture position r, probe aperture position c —
    occupies rows r*K..r*K+K-1 and columns c*K..c*K+K-1 of the output,
    matching the row = DUT element, column = probe element convention of
    the per-position transfer matrices.
    """
    if not blocks or not blocks[0]:
        raise DimensionError("block grid must be non-empty")
    ncols = len(blocks[0])
    arrays = []
    k = None
    for row in blocks:
        if len(row) != ncols:
            raise DimensionError("block grid rows have differing lengths")
        arow = []
        for blk in row:
            a = np.asarray(blk, dtype=complex)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise DimensionError(f"blocks must be square, got shape {a.shape}")
            if k is None:
                k = a.shape[0]
            elif a.shape[0] != k:
                raise DimensionError(
                    f"inconsistent block size: {a.shape[0]} vs {k}"
                )
            arow.append(a)
        arrays.append(arow)
    return np.block(arrays)
