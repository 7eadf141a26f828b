"""Render figures from wclab output bundles.

This package talks to wclab only through its documented on-disk formats
(matrix/isolation/grid/peaks CSV) -- it never imports wclab itself, so the
two can evolve independently as long as the file contracts hold.
"""

from .cli import FigureJob, JobError, load_job
from .figures import FIGURE_KINDS, build_figure, render
from .formats import (
    FormatError,
    read_grid_csv,
    read_isolation_csv,
    read_matrix_csv,
    read_peaks_csv,
)

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "FigureJob",
    "FormatError",
    "JobError",
    "build_figure",
    "load_job",
    "read_grid_csv",
    "read_isolation_csv",
    "read_matrix_csv",
    "read_peaks_csv",
    "render",
    "__version__",
]
