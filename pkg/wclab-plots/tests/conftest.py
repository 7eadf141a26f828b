"""Shared fixtures: a real output bundle produced through the wclab CLI.

The bundle is generated in a subprocess so this package's own code never
imports wclab -- the tests exercise the documented file formats exactly the
way a user's shell pipeline would.
"""
import subprocess
import sys
import textwrap

import pytest


@pytest.fixture(scope="session")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundle-src")
    cfg = root / "cfg.yaml"
    cfg.write_text(textwrap.dedent("""\
        kind: drone-scenario
        output_dir: %s
        dut: {rows: 2, cols: 4}
        scenario:
          num_freq: 129
          num_time: 128
          max_range_m: 240.0
          snapshots:
            - label: t1
              targets:
                - {range_m: 50.0, velocity_mps: 7.0, elevation_deg: 10.0,
                   azimuth_deg: -5.0, gain_db: 0.0}
                - {range_m: 120.0, velocity_mps: 3.0, gain_db: -10.0}
    """) % (root / "bundle"))
    proc = subprocess.run(
        [sys.executable, "-m", "wclab.cli", "run", str(cfg), "--quiet"],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        pytest.fail(f"could not build fixture bundle via wclab: {proc.stderr}")
    return root / "bundle"


def png_dimensions(path) -> tuple[int, int]:
    """(width, height) straight from the PNG IHDR chunk."""
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n", "not a PNG file"
    return int.from_bytes(data[16:20], "big"), int.from_bytes(data[20:24], "big")
