"""Dense complex linear algebra with condition-number and SDD diagnostics.

Matrices are plain complex numpy arrays (row-major). The diagnostics here
drive the probe-placement analysis: a transfer matrix that is strictly
diagonally dominant (SDD) is provably well conditioned, which is what makes
its inverse usable as a calibration matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError, SingularMatrixError

# Relative floor under which the smallest singular value counts as zero.
SPECTRAL_SINGULAR_FLOOR = 1e-14
# Acceptable residual ||M @ inv(M) - I||_inf for a trusted inverse.
INVERSE_RESIDUAL_TOL = 1e-6


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError("matrix entries must be finite")
    return a


def _as_square(m) -> np.ndarray:
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def infinity_norm(m) -> float:
    """Max absolute row sum of a matrix."""
    return float(np.max(np.sum(np.abs(_as_matrix(m)), axis=1)))


def spectral_condition_number(m) -> float:
    """sigma_max / sigma_min; +inf when the matrix is numerically rank deficient."""
    a = _as_square(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] < SPECTRAL_SINGULAR_FLOOR * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def invert_matrix(m, residual_tol: float = INVERSE_RESIDUAL_TOL) -> np.ndarray:
    """Inverse via partial-pivot LU with an explicit multiply-back residual check.

    Raises SingularMatrixError when the factorization fails outright or the
    residual ||M @ inv - I||_inf exceeds residual_tol.
    """
    a = _as_square(m)
    n = a.shape[0]
    try:
        inv = np.linalg.solve(a, np.eye(n, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"matrix is singular: {exc}") from exc
    residual = np.max(np.sum(np.abs(a @ inv - np.eye(n)), axis=1))
    if not residual <= residual_tol:
        raise SingularMatrixError(
            f"inverse residual {residual:.3e} exceeds tolerance {residual_tol:.1e}"
        )
    return inv


def infinity_condition_number(m) -> float:
    """||M||_inf * ||M^-1||_inf, the max-row-sum condition number."""
    a = _as_square(m)
    inv = invert_matrix(a)
    return infinity_norm(a) * infinity_norm(inv)


@dataclass(frozen=True)
class SddReport:
    """Diagonal-dominance diagnostics for one square matrix.

    epsilon is the worst-row ratio of off-diagonal modulus sum to diagonal
    modulus; the bound fields are present only when the matrix is SDD.
    """

    is_sdd: bool
    d_max: float
    d_min: float
    epsilon: float | None = None
    varah_inverse_bound: float | None = None
    kappa_inf_upper: float | None = None


def sdd_analysis(m) -> SddReport:
    """Check strict diagonal dominance and compute the associated bounds.

    For an SDD matrix: epsilon = max_i sum_{j!=i}|m_ij| / |m_ii|, the inverse
    norm is bounded by 1/min_i(|m_ii| - sum_{j!=i}|m_ij|), and the infinity
    condition number by (d_max/d_min)(1+epsilon)/(1-epsilon).
    """
    a = _as_square(m)
    diag = np.abs(np.diag(a))
    off = np.sum(np.abs(a), axis=1) - diag
    d_max = float(np.max(diag))
    d_min = float(np.min(diag))
    is_sdd = bool(np.all(diag > off))
    if not is_sdd:
        return SddReport(is_sdd=False, d_max=d_max, d_min=d_min)
    epsilon = float(np.max(off / diag))
    varah = 1.0 / float(np.min(diag - off))
    kappa_upper = (d_max / d_min) * (1 + epsilon) / (1 - epsilon)
    return SddReport(
        is_sdd=True,
        d_max=d_max,
        d_min=d_min,
        epsilon=epsilon,
        varah_inverse_bound=varah,
        kappa_inf_upper=kappa_upper,
    )


def write_matrix_csv(m, path) -> None:
    """Dump a complex matrix as `row,col,re,im` rows (scientific notation)."""
    a = _as_matrix(m)
    with open(path, "w") as f:
        f.write("row,col,re,im\n")
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                f.write(f"{i},{j},{a[i, j].real:.12e},{a[i, j].imag:.12e}\n")


def read_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by write_matrix_csv."""
    rows, cols, res, ims = [], [], [], []
    with open(path) as f:
        header = f.readline().strip()
        if header != "row,col,re,im":
            raise ParameterError(f"unexpected matrix CSV header: {header!r}")
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            i, j, re, im = line.split(",")
            rows.append(int(i))
            cols.append(int(j))
            res.append(float(re))
            ims.append(float(im))
    if not rows:
        raise ParameterError(f"matrix CSV {path} contains no entries")
    out = np.zeros((max(rows) + 1, max(cols) + 1), dtype=complex)
    out[rows, cols] = np.array(res) + 1j * np.array(ims)
    return out
