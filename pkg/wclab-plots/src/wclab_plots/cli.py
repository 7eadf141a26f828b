"""wclab-plot: render one figure from a small YAML job file.

A job file names its inputs, the figure kind, and the output image:

    kind: range-velocity
    input: bundle/drone/map_ota_t1.csv
    peaks: bundle/drone/peaks_ota_t1_seed0.csv   # optional annotations
    output: figures/rv_ota_t1.png
    title: OTA range-velocity, snapshot t1       # optional

Relative paths resolve against the job file's directory, so job files can
live next to the bundles they describe.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import yaml

from .figures import FIGURE_KINDS, render
from .formats import FormatError

_JOB_KEYS = ("kind", "input", "output", "peaks", "title")


class JobError(Exception):
    """The job file is missing, malformed, or names bad inputs."""


@dataclass
class FigureJob:
    kind: str
    input: str
    output: str
    peaks: str | None = None
    title: str | None = None


def _path_field(raw: dict, key: str, base: Path, required: bool = True,
                must_exist: bool = True) -> str | None:
    value = raw.get(key)
    if value is None:
        if required:
            raise JobError(f"job is missing required field '{key}'")
        return None
    if not isinstance(value, str) or not value:
        raise JobError(f"{key} must be a non-empty path string")
    p = Path(value)
    if not p.is_absolute():
        p = base / p
    if must_exist and not p.is_file():
        raise JobError(f"{key}: file not found: {p}")
    return str(p)


def load_job(path) -> FigureJob:
    """Read and validate a YAML job file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise JobError(f"cannot read job file {p}: {e}") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise JobError(f"job parse error: {e}") from e
    if not isinstance(raw, dict):
        raise JobError(f"job file must be a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(_JOB_KEYS))
    if unknown:
        raise JobError(f"unknown job field(s) {', '.join(unknown)}; "
                       f"allowed: {', '.join(_JOB_KEYS)}")

    kind = raw.get("kind")
    if kind is None:
        raise JobError(f"job is missing required field 'kind'; "
                       f"valid kinds: {', '.join(FIGURE_KINDS)}")
    if kind not in FIGURE_KINDS:
        raise JobError(f"unknown figure kind {kind!r}; valid kinds: {', '.join(FIGURE_KINDS)}")

    title = raw.get("title")
    if title is not None and not isinstance(title, str):
        raise JobError("title must be a string")

    base = p.parent
    return FigureJob(
        kind=kind,
        input=_path_field(raw, "input", base),
        output=_path_field(raw, "output", base, must_exist=False),
        peaks=_path_field(raw, "peaks", base, required=False),
        title=title,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wclab-plot",
        description="Render one figure from a wclab bundle according to a YAML job file.",
    )
    parser.add_argument("job_file", help="path to a YAML figure-job file")
    parser.add_argument("--quiet", action="store_true", help="suppress the written-path message")
    args = parser.parse_args(argv)
    try:
        job = load_job(args.job_file)
        Path(job.output).parent.mkdir(parents=True, exist_ok=True)
        written = render(job)
    except (JobError, FormatError) as e:
        print(f"wclab-plot: {e}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {written}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
