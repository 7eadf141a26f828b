"""Shared test helpers."""
import numpy as np


def random_sdd_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random complex matrix that is strictly diagonally dominant by construction.

    Off-diagonals are complex standard normal; each diagonal entry is then set
    to the row's off-diagonal modulus sum times (1 + u), u ~ U(0.05, 1).
    """
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    np.fill_diagonal(m, 0.0)
    row_sums = np.sum(np.abs(m), axis=1)
    u = rng.uniform(0.05, 1.0, size=n)
    m[np.diag_indices(n)] = row_sums * (1.0 + u)
    return m
