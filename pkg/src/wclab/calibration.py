"""ON-OFF measurement simulation, calibration inversion, APM quantization,
and wireless-cable isolation scoring.

The calibration matrix is the inverse of the measured transfer matrix; the
quality of the resulting "wireless cables" is scored from C @ calib, whose
off-diagonal entries are leakage between links.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLinkError, DimensionError, ParameterError
from .linalg import _as_square, invert_matrix

ISOLATION_CAP_DB = 160.0
CALIBRATION_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class MeasurementErrorModel:
    """Additive i.i.d. circular complex Gaussian measurement error.

    relative_error_db scales the per-entry standard deviation against the rms
    modulus of the true matrix; None disables the error entirely.
    """

    relative_error_db: float | None = -40.0
    seed: int = 0

    def __post_init__(self):
        if self.relative_error_db is not None and self.relative_error_db > 0:
            raise ParameterError(
                f"relative_error_db must be <= 0 or None: {self.relative_error_db}"
            )


@dataclass(frozen=True)
class QuantizationModel:
    """Phase/amplitude granularity of the programmable weight network."""

    phase_bits: int = 10
    amplitude_step_db: float = 0.0

    def __post_init__(self):
        if self.phase_bits < 1:
            raise ParameterError(f"phase_bits must be >= 1: {self.phase_bits}")
        if self.amplitude_step_db < 0:
            raise ParameterError(
                f"amplitude_step_db must be >= 0: {self.amplitude_step_db}"
            )


def simulate_onoff_measurement(c, err: MeasurementErrorModel) -> np.ndarray:
    """Measured transfer matrix: true matrix plus seeded Gaussian error."""
    a = _as_square(c)
    if err.relative_error_db is None:
        return a.copy()
    rng = np.random.default_rng(err.seed)
    sigma = float(np.sqrt(np.mean(np.abs(a) ** 2))) * 10 ** (err.relative_error_db / 20)
    noise = rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape)
    return a + sigma * noise / np.sqrt(2)


def invert_calibration(c_hat) -> np.ndarray:
    """Calibration matrix: inverse of the measured transfer matrix.

    Enforces a multiply-back residual of at most 1e-8 so that a borderline
    matrix fails loudly instead of producing useless wireless cables.
    """
    return invert_matrix(c_hat, residual_tol=CALIBRATION_RESIDUAL_TOL)


def quantize_weights(w, q: QuantizationModel) -> np.ndarray:
    """Round complex weights to the hardware's phase/amplitude granularity.

    Phases snap to multiples of 2 pi / 2**phase_bits; magnitudes snap to
    amplitude_step_db multiples in dB when the step is nonzero. Exact zeros
    pass through unchanged.
    """
    a = np.asarray(w, dtype=complex)
    mag = np.abs(a)
    nonzero = mag > 0
    phase_step = 2 * np.pi / (2 ** q.phase_bits)
    phase = np.round(np.angle(a) / phase_step) * phase_step
    out_mag = mag.copy()
    if q.amplitude_step_db > 0:
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(np.where(nonzero, mag, 1.0))
        out_mag = np.where(
            nonzero, 10 ** (np.round(db / q.amplitude_step_db) * q.amplitude_step_db / 20), 0.0
        )
    out = out_mag * np.exp(1j * phase)
    return np.where(nonzero, out, 0.0)


@dataclass(eq=False)
class IsolationReport:
    """Leakage analysis of C @ calib: per-link isolation in dB."""

    product_matrix: np.ndarray
    isolation_db: np.ndarray
    mean_db: float
    min_db: float


def isolation_report(c, calib) -> IsolationReport:
    """Score the established wireless cables.

    isolation_db[i, j != i] = 20 log10(|P_ii| / |P_ij|) with P = C @ calib,
    capped at 160 dB; diagonal entries are set to the cap. mean/min are taken
    over the off-diagonal entries.
    """
    a = _as_square(c)
    b = _as_square(calib)
    if a.shape != b.shape:
        raise DimensionError(f"matrix shapes differ: {a.shape} vs {b.shape}")
    p = a @ b
    diag = np.abs(np.diag(p))
    if np.any(diag == 0):
        raise DegenerateLinkError("a wireless link has zero through-gain")
    with np.errstate(divide="ignore"):
        iso = 20 * np.log10(diag[:, None] / np.abs(p))
    iso = np.minimum(iso, ISOLATION_CAP_DB)
    np.fill_diagonal(iso, ISOLATION_CAP_DB)
    off = ~np.eye(p.shape[0], dtype=bool)
    return IsolationReport(
        product_matrix=p,
        isolation_db=iso,
        mean_db=float(np.mean(iso[off])),
        min_db=float(np.min(iso[off])),
    )


def write_isolation_csv(report: IsolationReport, path) -> None:
    """Dump isolation as `i,j,isolation_db` rows plus a trailing summary line."""
    iso = report.isolation_db
    with open(path, "w") as f:
        f.write("i,j,isolation_db\n")
        for i in range(iso.shape[0]):
            for j in range(iso.shape[1]):
                f.write(f"{i},{j},{iso[i, j]:.6f}\n")
        f.write(f"# mean_db={report.mean_db:.6f},min_db={report.min_db:.6f}\n")
