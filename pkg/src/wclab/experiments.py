"""Experiment orchestration: config ingestion, staged runs, and summaries.

The five experiment kinds map onto the library's capability areas:
distance-sweep (how link conditioning degrades with array standoff),
synthetic-array (a 2x2 aperture tiling assembled into one large virtual
array), pattern-comparison (narrow vs wide element patterns at a fixed
standoff), drone-scenario (the full emulate-then-estimate pipeline in
ideal/conducted/ota modes), and custom (a named list of the above stages
run into one bundle). Runs are deterministic per seed list and every
output is a documented CSV/binary format, so bundles diff cleanly.
"""

from __future__ import annotations

import csv
import hashlib
import platform
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .calibration import (
    MeasurementErrorModel,
    QuantizationModel,
    invert_calibration,
    isolation_report,
    quantize_weights,
    simulate_onoff_measurement,
    write_isolation_csv,
)
from .emulation import MODES, Scenario, TargetState, generate_cfr_dataset, write_cfr_binary
from .errors import ConfigError, ParameterError, SingularMatrixError, WclabError
from .estimation import (
    bartlett_pas,
    detect_pas_peaks,
    detect_peaks,
    normalized_gain_estimate,
    pair_detections,
    psp,
    range_velocity_map,
    target_slice_cir,
    write_map_csv,
    write_pas_csv,
    write_peaks_csv,
)
from .geometry import (
    C0,
    RadiationPattern,
    UpaGeometry,
    assemble_synthetic_matrix,
    synthesize_transfer_matrix,
)
from .linalg import (
    infinity_condition_number,
    read_matrix_csv,
    sdd_analysis,
    spectral_condition_number,
    write_matrix_csv,
)

EXPERIMENT_KINDS = (
    "distance-sweep",
    "synthetic-array",
    "pattern-comparison",
    "drone-scenario",
    "custom",
)
_BASE_KINDS = EXPERIMENT_KINDS[:4]

# Drone-pipeline detection settings. The exclusion zone is 10 unpadded bins
# wide so a strong target's rectangular-window sidelobes (first one only
# -13 dB down) can never outrank a genuinely weaker second target, and the
# floor admits targets down to 45 dB below the map peak.
_PEAK_SEPARATION_UNPADDED_BINS = 10
_PEAK_FLOOR_DB = -45.0
_PAS_MAX_PEAKS = 3
_PAS_GRID_STEP_DEG = 1.0
_MAP_ELEMENT_INDEX = 0
_ZERO_PAD = 4

# Default two-drone flight: per snapshot, (range_m, velocity_mps,
# elevation_deg, azimuth_deg, gain_db) for each of the two targets.
_DEFAULT_SNAPSHOTS = (
    ("t1", ((50.0, 7.0, 50.0, -20.0, -5.0), (155.0, 5.0, 0.0, 0.0, -25.0))),
    ("t2", ((26.0, 2.0, 20.0, 10.0, 0.0), (125.0, 10.0, 0.0, 0.0, -20.0))),
    ("t3", ((38.0, 10.0, -10.0, 30.0, -3.0), (110.0, 15.0, 0.0, 0.0, -13.0))),
)

_SUMMARY_PARAMS = ("range_m", "velocity_mps", "elevation_deg", "azimuth_deg", "gain_db")


@dataclass(frozen=True)
class ArraySpec:
    """One planar array's lattice and element pattern."""

    rows: int
    cols: int
    spacing_m: float
    pattern_q: float
    pattern_floor: float

    def pattern(self) -> RadiationPattern:
        return RadiationPattern(self.pattern_q, self.pattern_floor)


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description (all defaults filled in)."""

    kind: str
    output_dir: str
    seeds: list
    dut: ArraySpec
    probe: ArraySpec
    standoff_m: float
    standoffs_m: list
    wide_pattern_q: float
    relative_error_db: float | None
    quantization: QuantizationModel | None
    scenario: Scenario
    modes: list
    max_range_m: float | None
    physical_c_csv: str | None
    stages: list | None


# ---------------------------------------------------------------------------
# config parsing


def _check_keys(block: dict, allowed, field: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{field}: unknown key(s) {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def _mapping(raw, field: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{field} must be a mapping, got {type(raw).__name__}")
    return raw


def _num(value, field: str, positive: bool = False, nonnegative: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{field} must be a number, got {value!r}")
    v = float(value)
    if positive and v <= 0:
        raise ConfigError(f"{field} must be > 0, got {v}")
    if nonnegative and v < 0:
        raise ConfigError(f"{field} must be >= 0, got {v}")
    return v


def _int(value, field: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{field} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{field} must be >= {minimum}, got {value}")
    return value


def _parse_array(raw, field: str, defaults: ArraySpec) -> ArraySpec:
    block = _mapping(raw, field)
    _check_keys(block, ("rows", "cols", "spacing_m", "pattern_q", "pattern_floor"), field)
    spec = ArraySpec(
        rows=_int(block.get("rows", defaults.rows), f"{field}.rows", minimum=1),
        cols=_int(block.get("cols", defaults.cols), f"{field}.cols", minimum=1),
        spacing_m=_num(block.get("spacing_m", defaults.spacing_m), f"{field}.spacing_m", positive=True),
        pattern_q=_num(block.get("pattern_q", defaults.pattern_q), f"{field}.pattern_q", positive=True),
        pattern_floor=_num(
            block.get("pattern_floor", defaults.pattern_floor), f"{field}.pattern_floor", positive=True
        ),
    )
    if spec.pattern_floor > 1.0:
        raise ConfigError(f"{field}.pattern_floor must be <= 1, got {spec.pattern_floor}")
    return spec


def _parse_targets(raw, field: str) -> list:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{field} must be a non-empty list of targets")
    targets = []
    for j, item in enumerate(raw):
        tfield = f"{field}[{j}]"
        block = _mapping(item, tfield)
        _check_keys(
            block, ("range_m", "velocity_mps", "elevation_deg", "azimuth_deg", "gain_db"), tfield
        )
        try:
            targets.append(
                TargetState(
                    range_m=_num(block.get("range_m"), f"{tfield}.range_m"),
                    radial_velocity_mps=_num(block.get("velocity_mps", 0.0), f"{tfield}.velocity_mps"),
                    elevation_deg=_num(block.get("elevation_deg", 0.0), f"{tfield}.elevation_deg"),
                    azimuth_deg=_num(block.get("azimuth_deg", 0.0), f"{tfield}.azimuth_deg"),
                    gain_db=_num(block.get("gain_db", 0.0), f"{tfield}.gain_db"),
                )
            )
        except ParameterError as e:
            raise ConfigError(f"{tfield}: {e}") from e
    return targets


def _default_snapshots() -> list:
    out = []
    for label, rows in _DEFAULT_SNAPSHOTS:
        targets = [
            TargetState(
                range_m=r, radial_velocity_mps=v, elevation_deg=el, azimuth_deg=az, gain_db=g
            )
            for r, v, el, az, g in rows
        ]
        out.append((label, targets))
    return out


def _parse_scenario(raw, field: str) -> tuple[Scenario, float | None]:
    block = _mapping(raw, field)
    _check_keys(
        block,
        (
            "carrier_hz",
            "bandwidth_hz",
            "num_freq",
            "num_time",
            "snapshot_interval_s",
            "max_range_m",
            "snapshots",
        ),
        field,
    )
    carrier = _num(block.get("carrier_hz", 3.5e9), f"{field}.carrier_hz", positive=True)
    bandwidth = _num(block.get("bandwidth_hz", 40e6), f"{field}.bandwidth_hz", positive=True)
    num_freq = _int(block.get("num_freq", 1001), f"{field}.num_freq", minimum=2)
    num_time = _int(block.get("num_time", 1000), f"{field}.num_time", minimum=2)
    dt = _num(
        block.get("snapshot_interval_s", 1.0 / 700.0), f"{field}.snapshot_interval_s", positive=True
    )
    max_range = block.get("max_range_m", 300.0)
    if max_range is not None:
        max_range = _num(max_range, f"{field}.max_range_m", positive=True)
    raw_snaps = block.get("snapshots")
    if raw_snaps is None:
        snapshots = _default_snapshots()
    else:
        if not isinstance(raw_snaps, list):
            raise ConfigError(f"{field}.snapshots must be a list")
        snapshots = []
        for i, item in enumerate(raw_snaps):
            sfield = f"{field}.snapshots[{i}]"
            sblock = _mapping(item, sfield)
            _check_keys(sblock, ("label", "targets"), sfield)
            label = sblock.get("label", f"s{i}")
            if not isinstance(label, str) or not label:
                raise ConfigError(f"{sfield}.label must be a non-empty string")
            snapshots.append((label, _parse_targets(sblock.get("targets"), f"{sfield}.targets")))
        labels = [lbl for lbl, _ in snapshots]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"{field}.snapshots labels must be unique, got {labels}")
    try:
        scenario = Scenario(
            carrier_hz=carrier,
            bandwidth_hz=bandwidth,
            num_freq=num_freq,
            num_time=num_time,
            snapshot_interval_s=dt,
            snapshots=snapshots,
        )
    except ParameterError as e:
        raise ConfigError(f"{field}: {e}") from e
    return scenario, max_range


def parse_config(raw: dict, base_dir=None) -> ExperimentConfig:
    """Validate a raw mapping and fill every default explicitly."""
    _check_keys(
        raw,
        (
            "kind",
            "output_dir",
            "seeds",
            "dut",
            "probe",
            "standoff_m",
            "standoffs_m",
            "wide_pattern_q",
            "error",
            "quantization",
            "scenario",
            "modes",
            "physical_c_csv",
            "stages",
        ),
        "config",
    )
    if "kind" not in raw:
        raise ConfigError(f"kind is required; valid kinds: {', '.join(EXPERIMENT_KINDS)}")
    kind = raw["kind"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"unknown experiment kind {kind!r}; valid kinds: {', '.join(EXPERIMENT_KINDS)}"
        )

    scenario, max_range = _parse_scenario(raw.get("scenario"), "scenario")
    half_wavelength = C0 / scenario.carrier_hz / 2.0
    dut = _parse_array(
        raw.get("dut"),
        "dut",
        ArraySpec(rows=4, cols=8, spacing_m=half_wavelength, pattern_q=14.0, pattern_floor=0.01),
    )
    probe = _parse_array(raw.get("probe"), "probe", dut)
    if dut.rows * dut.cols != probe.rows * probe.cols:
        raise ConfigError(
            f"probe element count {probe.rows * probe.cols} must match "
            f"dut element count {dut.rows * dut.cols}"
        )

    seeds_raw = raw.get("seeds", [0])
    if not isinstance(seeds_raw, list) or not seeds_raw:
        raise ConfigError("seeds must be a non-empty list of integers")
    seeds = [_int(s, f"seeds[{i}]") for i, s in enumerate(seeds_raw)]

    error_block = _mapping(raw.get("error", {"relative_error_db": -40.0}), "error")
    _check_keys(error_block, ("relative_error_db",), "error")
    error_db = error_block.get("relative_error_db", -40.0)
    if error_db is not None:
        error_db = _num(error_db, "error.relative_error_db")
        if error_db > 0:
            raise ConfigError(f"error.relative_error_db must be <= 0 dB, got {error_db}")

    if "quantization" in raw and raw["quantization"] is None:
        quant = None
    else:
        qblock = _mapping(raw.get("quantization"), "quantization")
        _check_keys(qblock, ("phase_bits", "amplitude_step_db"), "quantization")
        try:
            quant = QuantizationModel(
                phase_bits=_int(qblock.get("phase_bits", 10), "quantization.phase_bits"),
                amplitude_step_db=_num(
                    qblock.get("amplitude_step_db", 0.0),
                    "quantization.amplitude_step_db",
                    nonnegative=True,
                ),
            )
        except ParameterError as e:
            raise ConfigError(f"quantization: {e}") from e

    modes_raw = raw.get("modes", list(MODES))
    if not isinstance(modes_raw, list) or not modes_raw:
        raise ConfigError(f"modes must be a non-empty list drawn from {', '.join(MODES)}")
    for m in modes_raw:
        if m not in MODES:
            raise ConfigError(f"modes: unknown mode {m!r}; valid modes: {', '.join(MODES)}")
    modes = [m for m in MODES if m in modes_raw]

    standoff = _num(raw.get("standoff_m", 0.01), "standoff_m", positive=True)
    standoffs_raw = raw.get("standoffs_m", [0.01, 0.30, 0.80])
    if not isinstance(standoffs_raw, list) or not standoffs_raw:
        raise ConfigError("standoffs_m must be a non-empty list of distances")
    standoffs = [_num(s, f"standoffs_m[{i}]", positive=True) for i, s in enumerate(standoffs_raw)]
    wide_q = _num(raw.get("wide_pattern_q", 2.0), "wide_pattern_q", positive=True)

    physical_c = raw.get("physical_c_csv")
    if physical_c is not None:
        if not isinstance(physical_c, str):
            raise ConfigError("physical_c_csv must be a path string")
        p = Path(physical_c)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        if not p.is_file():
            raise ConfigError(f"physical_c_csv: file not found: {p}")
        physical_c = str(p)

    stages_raw = raw.get("stages")
    if kind == "custom":
        if stages_raw is None:
            stages = list(_BASE_KINDS)
        else:
            if not isinstance(stages_raw, list) or not stages_raw:
                raise ConfigError(f"stages must be a non-empty list drawn from {', '.join(_BASE_KINDS)}")
            for s in stages_raw:
                if s not in _BASE_KINDS:
                    raise ConfigError(f"stages: unknown stage {s!r}; valid stages: {', '.join(_BASE_KINDS)}")
            stages = list(stages_raw)
    else:
        if stages_raw is not None:
            raise ConfigError("stages is only valid for kind: custom")
        stages = None

    output_dir = raw.get("output_dir", "wclab-out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir must be a non-empty path string")

    return ExperimentConfig(
        kind=kind,
        output_dir=output_dir,
        seeds=seeds,
        dut=dut,
        probe=probe,
        standoff_m=standoff,
        standoffs_m=standoffs,
        wide_pattern_q=wide_q,
        relative_error_db=error_db,
        quantization=quant,
        scenario=scenario,
        modes=modes,
        max_range_m=max_range,
        physical_c_csv=physical_c,
        stages=stages,
    )


def load_config(path) -> ExperimentConfig:
    """Read, parse, and validate a YAML experiment config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        loc = ""
        mark = getattr(e, "problem_mark", None)
        if mark is not None:
            loc = f" at line {mark.line + 1}, column {mark.column + 1}"
        raise ConfigError(f"config parse error{loc}: {e}") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config top level must be a mapping, got {type(raw).__name__}")
    return parse_config(raw, base_dir=p.parent)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-type view of a config with every default made explicit."""

    def arr(a: ArraySpec) -> dict:
        return {
            "rows": a.rows,
            "cols": a.cols,
            "spacing_m": a.spacing_m,
            "pattern_q": a.pattern_q,
            "pattern_floor": a.pattern_floor,
        }

    quant = None
    if cfg.quantization is not None:
        quant = {
            "phase_bits": cfg.quantization.phase_bits,
            "amplitude_step_db": cfg.quantization.amplitude_step_db,
        }
    snapshots = [
        {
            "label": label,
            "targets": [
                {
                    "range_m": t.range_m,
                    "velocity_mps": t.radial_velocity_mps,
                    "elevation_deg": t.elevation_deg,
                    "azimuth_deg": t.azimuth_deg,
                    "gain_db": t.gain_db,
                }
                for t in targets
            ],
        }
        for label, targets in cfg.scenario.snapshots
    ]
    return {
        "kind": cfg.kind,
        "output_dir": cfg.output_dir,
        "seeds": list(cfg.seeds),
        "dut": arr(cfg.dut),
        "probe": arr(cfg.probe),
        "standoff_m": cfg.standoff_m,
        "standoffs_m": list(cfg.standoffs_m),
        "wide_pattern_q": cfg.wide_pattern_q,
        "error": {"relative_error_db": cfg.relative_error_db},
        "quantization": quant,
        "scenario": {
            "carrier_hz": cfg.scenario.carrier_hz,
            "bandwidth_hz": cfg.scenario.bandwidth_hz,
            "num_freq": cfg.scenario.num_freq,
            "num_time": cfg.scenario.num_time,
            "snapshot_interval_s": cfg.scenario.snapshot_interval_s,
            "max_range_m": cfg.max_range_m,
            "snapshots": snapshots,
        },
        "modes": list(cfg.modes),
        "physical_c_csv": cfg.physical_c_csv,
        "stages": list(cfg.stages) if cfg.stages is not None else None,
    }


def config_echo_yaml(cfg: ExperimentConfig) -> str:
    """Self-documenting YAML dump: loading it back reproduces the config."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True, default_flow_style=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(config_echo_yaml(cfg).encode()).hexdigest()


# ---------------------------------------------------------------------------
# stage helpers


def _config_pair(cfg: ExperimentConfig, standoff_m: float,
                 pattern: RadiationPattern | None = None) -> tuple[UpaGeometry, UpaGeometry]:
    """DUT/probe geometry pair at a standoff, optionally overriding patterns."""
    dut = UpaGeometry(
        rows=cfg.dut.rows,
        cols=cfg.dut.cols,
        spacing_m=cfg.dut.spacing_m,
        pattern=pattern if pattern is not None else cfg.dut.pattern(),
    )
    probe = UpaGeometry(
        rows=cfg.probe.rows,
        cols=cfg.probe.cols,
        spacing_m=cfg.probe.spacing_m,
        center_m=(0.0, standoff_m, 0.0),
        boresight=(0.0, -1.0, 0.0),
        pattern=pattern if pattern is not None else cfg.probe.pattern(),
    )
    return dut, probe


def _measured_calibration(c: np.ndarray, cfg: ExperimentConfig, seed: int) -> np.ndarray:
    """Calibration matrix as the full-mesh weight network would hold it:
    inverted from an error-laden measurement, entries quantized."""
    err = MeasurementErrorModel(cfg.relative_error_db, seed=seed)
    calib = invert_calibration(simulate_onoff_measurement(c, err))
    if cfg.quantization is not None:
        calib = quantize_weights(calib, cfg.quantization)
    return calib


def _guarded_kappa_inf(c: np.ndarray) -> float:
    """Infinity condition number, with inf standing in for numerically singular."""
    try:
        return infinity_condition_number(c)
    except SingularMatrixError:
        return float("inf")


def _fmt_opt(v) -> str:
    return "nan" if v is None else f"{v:.9e}"


def _conditioning_fields(k2: float, kinf: float, rep) -> str:
    return (
        f"{k2:.9e},{kinf:.9e},{int(rep.is_sdd)},{rep.d_max:.9e},{rep.d_min:.9e},"
        f"{_fmt_opt(rep.epsilon)},{_fmt_opt(rep.varah_inverse_bound)},{_fmt_opt(rep.kappa_inf_upper)}"
    )


_CONDITIONING_COLUMNS = (
    "kappa2,kappa_inf,is_sdd,d_max,d_min,epsilon,varah_inverse_bound,kappa_inf_upper"
)


# ---------------------------------------------------------------------------
# stages


def _run_distance_sweep(cfg: ExperimentConfig, out: Path, quiet: bool) -> str | None:
    d = out / "distance_sweep"
    d.mkdir(exist_ok=True)
    freq = cfg.scenario.carrier_hz
    cond_rows = []
    iso_rows = []
    for idx, standoff in enumerate(cfg.standoffs_m):
        dut, probe = _config_pair(cfg, standoff)
        c = synthesize_transfer_matrix(dut, probe, freq)
        tag = f"standoff{idx}_{standoff:.4g}m"
        write_matrix_csv(c, d / f"c_{tag}.csv")
        k2 = spectral_condition_number(c)
        rep = sdd_analysis(c)
        cond_rows.append(f"{standoff:.9e},{_conditioning_fields(k2, _guarded_kappa_inf(c), rep)}")
        if not quiet:
            print(f"[distance-sweep] {standoff:.4g} m: kappa2={k2:.6g} sdd={rep.is_sdd}", flush=True)
        means = []
        mins = []
        for seed in cfg.seeds:
            rep_iso = isolation_report(c, _measured_calibration(c, cfg, seed))
            write_isolation_csv(rep_iso, d / f"isolation_{tag}_seed{seed}.csv")
            means.append(rep_iso.mean_db)
            mins.append(rep_iso.min_db)
        iso_rows.append(
            f"{standoff:.9e},{len(cfg.seeds)},{statistics.median(means):.6f},"
            f"{min(means):.6f},{max(means):.6f},{statistics.median(mins):.6f}"
        )
    (d / "conditioning.csv").write_text(
        f"standoff_m,{_CONDITIONING_COLUMNS}\n" + "\n".join(cond_rows) + "\n"
    )
    (d / "isolation_summary.csv").write_text(
        "standoff_m,n_seeds,median_mean_db,min_mean_db,max_mean_db,median_min_db\n"
        + "\n".join(iso_rows)
        + "\n"
    )
    return None


def _run_synthetic_array(cfg: ExperimentConfig, out: Path, quiet: bool) -> str:
    d = out / "synthetic_array"
    d.mkdir(exist_ok=True)
    rows, cols = cfg.dut.rows, cfg.dut.cols
    spacing = cfg.dut.spacing_m
    standoff = cfg.standoff_m
    freq = cfg.scenario.carrier_hz
    dut_pat = cfg.dut.pattern()
    probe_pat = cfg.probe.pattern()

    # 2x2 tiling of the base aperture: tile centers sit half an aperture away
    # from the virtual-array center in each lattice direction, so the four
    # tiles together occupy exactly the (2*rows) x (2*cols) virtual aperture.
    tile_order = ((0, 0), (0, 1), (1, 0), (1, 1))
    dut_tiles = []
    probe_tiles = []
    for rt, ct in tile_order:
        cx = (cols * ct - cols / 2.0) * spacing
        cz = (rows * rt - rows / 2.0) * spacing
        dut_tiles.append(
            UpaGeometry(rows=rows, cols=cols, spacing_m=spacing, center_m=(cx, 0.0, cz), pattern=dut_pat)
        )
        probe_tiles.append(
            UpaGeometry(
                rows=rows,
                cols=cols,
                spacing_m=spacing,
                center_m=(cx, standoff, cz),
                boresight=(0.0, -1.0, 0.0),
                pattern=probe_pat,
            )
        )
    blocks = [
        [synthesize_transfer_matrix(dut_tiles[i], probe_tiles[j], freq) for j in range(4)]
        for i in range(4)
    ]
    assembled = assemble_synthetic_matrix(blocks)

    big_dut = UpaGeometry(rows=2 * rows, cols=2 * cols, spacing_m=spacing, pattern=dut_pat)
    big_probe = UpaGeometry(
        rows=2 * rows,
        cols=2 * cols,
        spacing_m=spacing,
        center_m=(0.0, standoff, 0.0),
        boresight=(0.0, -1.0, 0.0),
        pattern=probe_pat,
    )
    direct = synthesize_transfer_matrix(big_dut, big_probe, freq)

    # Map assembled index (tile, local row, local col) to the direct
    # synthesis's row-major index over the virtual aperture.
    k = rows * cols
    perm = np.empty(4 * k, dtype=int)
    for it, (rt, ct) in enumerate(tile_order):
        for r in range(rows):
            for c in range(cols):
                perm[it * k + r * cols + c] = (rt * rows + r) * (2 * cols) + (ct * cols + c)
    residual = float(np.max(np.abs(assembled - direct[np.ix_(perm, perm)])))

    k2 = spectral_condition_number(assembled)
    rep = sdd_analysis(assembled)
    write_matrix_csv(assembled, d / "c_assembled.csv")
    (d / "report.csv").write_text(
        f"virtual_rows,virtual_cols,standoff_m,max_abs_residual,{_CONDITIONING_COLUMNS}\n"
        f"{2 * rows},{2 * cols},{standoff:.9e},{residual:.9e},"
        f"{_conditioning_fields(k2, _guarded_kappa_inf(assembled), rep)}\n"
    )
    if not quiet:
        print(
            f"[synthetic-array] {2 * rows}x{2 * cols} assembled: residual={residual:.3e} "
            f"kappa2={k2:.6g}",
            flush=True,
        )
    return (
        "synthetic-array tiling: 2x2 grid of the base aperture; tile centers offset "
        "by +/-(cols/2)*spacing horizontally and +/-(rows/2)*spacing vertically"
    )


def _run_pattern_comparison(cfg: ExperimentConfig, out: Path, quiet: bool) -> str | None:
    d = out / "pattern_comparison"
    d.mkdir(exist_ok=True)
    freq = cfg.scenario.carrier_hz
    rows = []
    for label, q in (("narrow", cfg.dut.pattern_q), ("wide", cfg.wide_pattern_q)):
        pat = RadiationPattern(q, cfg.dut.pattern_floor)
        dut, probe = _config_pair(cfg, cfg.standoff_m, pattern=pat)
        c = synthesize_transfer_matrix(dut, probe, freq)
        write_matrix_csv(c, d / f"c_{label}.csv")
        k2 = spectral_condition_number(c)
        rep = sdd_analysis(c)
        rows.append(f"{label},{q:.9e},{_conditioning_fields(k2, _guarded_kappa_inf(c), rep)}")
        if not quiet:
            print(f"[pattern-comparison] {label} (q={q:g}): kappa2={k2:.6g}", flush=True)
    (d / "conditioning.csv").write_text(
        f"label,exponent_q,{_CONDITIONING_COLUMNS}\n" + "\n".join(rows) + "\n"
    )
    return None


def _nearest_angle(pas_peaks, elevation_deg: float, azimuth_deg: float) -> tuple[float, float]:
    """Pick the detected angular peak nearest a reference bearing.

    The two-way beam scan of a half-wavelength lattice has exact grating
    aliases inside a wide scan window, so the strongest peak alone is
    ambiguous; the reference bearing acts as the tracking prior that a real
    deployment would have.
    """
    best = (float("nan"), float("nan"))
    best_d = float("inf")
    for el, az, _power in pas_peaks:
        dist = (el - elevation_deg) ** 2 + (az - azimuth_deg) ** 2
        if dist < best_d:
            best_d = dist
            best = (el, az)
    return best


def _run_drone_scenario(cfg: ExperimentConfig, out: Path, quiet: bool) -> str | None:
    d = out / "drone"
    d.mkdir(exist_ok=True)
    scenario = cfg.scenario
    if not scenario.snapshots:
        raise ConfigError("drone-scenario requires scenario.snapshots to be non-empty")
    dut, probe = _config_pair(cfg, cfg.standoff_m)
    if cfg.physical_c_csv is not None:
        c_phys = read_matrix_csv(cfg.physical_c_csv)
    else:
        c_phys = synthesize_transfer_matrix(dut, probe, scenario.carrier_hz)
    write_matrix_csv(c_phys, d / "c_physical.csv")
    first_seed = cfg.seeds[0]
    if "ota" in cfg.modes:
        calib0 = _measured_calibration(c_phys, cfg, first_seed)
        write_isolation_csv(isolation_report(c_phys, calib0), d / f"isolation_ota_seed{first_seed}.csv")

    sep_bins = _PEAK_SEPARATION_UNPADDED_BINS * _ZERO_PAD
    est_rows = []
    psp_rows = []
    ideal_pas = {}

    def process_mode(mode: str, seed: int, write_files: bool) -> list[dict]:
        err = MeasurementErrorModel(cfg.relative_error_db, seed=seed) if mode != "ideal" else None
        quant = cfg.quantization if mode != "ideal" else None
        detections = []
        per_target = {}
        for snap_idx, (label, targets) in enumerate(scenario.snapshots):
            single = Scenario(
                carrier_hz=scenario.carrier_hz,
                bandwidth_hz=scenario.bandwidth_hz,
                num_freq=scenario.num_freq,
                num_time=scenario.num_time,
                snapshot_interval_s=scenario.snapshot_interval_s,
                snapshots=[(label, targets)],
            )
            ds = generate_cfr_dataset(
                single,
                dut,
                mode=mode,
                physical_c=c_phys if mode == "ota" else None,
                err=err,
                quant=quant,
            )[0]
            if write_files:
                write_cfr_binary(ds, d / f"cfr_{mode}_{label}.bin")
                write_map_csv(
                    range_velocity_map(
                        ds, _MAP_ELEMENT_INDEX, zero_pad=1, max_range_m=cfg.max_range_m
                    ),
                    d / f"map_{mode}_{label}.csv",
                )
            if not targets:
                del ds
                continue
            rv = range_velocity_map(
                ds, _MAP_ELEMENT_INDEX, zero_pad=_ZERO_PAD, max_range_m=cfg.max_range_m
            )
            peaks = detect_peaks(
                rv, max_peaks=len(targets), min_separation_bins=sep_bins, floor_db=_PEAK_FLOOR_DB
            )
            write_peaks_csv(peaks, d / f"peaks_{mode}_{label}_seed{seed}.csv")
            detections.append((snap_idx, peaks))
            for _, ti, pk in pair_detections([(snap_idx, peaks)], scenario):
                cir = target_slice_cir(ds, pk[0], velocity_hint_mps=pk[1])
                pas = bartlett_pas(
                    cir,
                    dut,
                    grid_step_deg=_PAS_GRID_STEP_DEG,
                    steering="two-way",
                    carrier_hz=scenario.carrier_hz,
                )
                pas_peaks = detect_pas_peaks(pas, max_peaks=_PAS_MAX_PEAKS)
                t = targets[ti]
                el, az = _nearest_angle(pas_peaks, t.elevation_deg, t.azimuth_deg)
                if write_files:
                    write_pas_csv(pas, d / f"pas_{mode}_{label}_target{ti}.csv")
                    write_peaks_csv(pas_peaks, d / f"pas_peaks_{mode}_{label}_target{ti}.csv")
                if mode == "ideal":
                    ideal_pas[(snap_idx, ti)] = pas
                    psp_val = None
                else:
                    ref = ideal_pas.get((snap_idx, ti))
                    psp_val = psp(pas, ref) if ref is not None else None
                per_target[(snap_idx, ti)] = {"el": el, "az": az, "psp": psp_val, "label": label}
            del ds
            if not quiet:
                print(f"[drone-scenario] seed {seed} mode {mode} snapshot {label}: done", flush=True)
        rows = []
        if detections:
            for g in normalized_gain_estimate(detections, scenario):
                info = per_target[(g.snapshot_index, g.target_index)]
                rows.append(
                    {
                        "seed": seed,
                        "mode": mode,
                        "snap_idx": g.snapshot_index,
                        "snapshot": info["label"],
                        "target": g.target_index,
                        "range_m": g.range_m,
                        "velocity_mps": g.velocity_mps,
                        "elevation_deg": info["el"],
                        "azimuth_deg": info["az"],
                        "gain_db": g.gain_db,
                        "psp": info["psp"],
                    }
                )
        return rows

    # The ideal run is the PAS reference for every mode and carries no
    # randomness, so it runs once regardless of the seed list.
    ideal_rows = process_mode("ideal", first_seed, write_files="ideal" in cfg.modes)
    if "ideal" in cfg.modes:
        est_rows.extend(ideal_rows)
    for seed in cfg.seeds:
        for mode in ("conducted", "ota"):
            if mode not in cfg.modes:
                continue
            rows = process_mode(mode, seed, write_files=seed == first_seed)
            est_rows.extend(rows)
            psp_rows.extend(r for r in rows if r["psp"] is not None)

    est_rows.sort(key=lambda r: (r["seed"], MODES.index(r["mode"]), r["snap_idx"], r["target"]))
    psp_rows.sort(key=lambda r: (r["seed"], MODES.index(r["mode"]), r["snap_idx"], r["target"]))
    with open(d / "estimates.csv", "w") as f:
        f.write("seed,mode,snapshot,target_index,range_m,velocity_mps,elevation_deg,azimuth_deg,gain_db\n")
        for r in est_rows:
            f.write(
                f"{r['seed']},{r['mode']},{r['snapshot']},{r['target']},"
                f"{r['range_m']:.6f},{r['velocity_mps']:.6f},{r['elevation_deg']:.6f},"
                f"{r['azimuth_deg']:.6f},{r['gain_db']:.6f}\n"
            )
    with open(d / "psp.csv", "w") as f:
        f.write("seed,mode,snapshot,target_index,psp_pct\n")
        for r in psp_rows:
            f.write(f"{r['seed']},{r['mode']},{r['snapshot']},{r['target']},{r['psp']:.6f}\n")
    return None


_STAGE_RUNNERS = {
    "distance-sweep": _run_distance_sweep,
    "synthetic-array": _run_synthetic_array,
    "pattern-comparison": _run_pattern_comparison,
    "drone-scenario": _run_drone_scenario,
}


def run_experiment(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    """Run every stage of a config into its output bundle directory.

    The bundle always contains config_echo.yaml (the fully-resolved config)
    and manifest.txt (config hash plus versions); each stage adds its own
    subdirectory of CSV/binary outputs. Drone runs also get summary.csv and
    summary.txt at the bundle root. Returns the bundle path.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.yaml").write_text(config_echo_yaml(cfg))
    stages = cfg.stages if cfg.kind == "custom" else [cfg.kind]
    notes = []
    for stage in stages:
        try:
            note = _STAGE_RUNNERS[stage](cfg, out, quiet)
        except ConfigError:
            raise
        except WclabError as e:
            raise type(e)(f"stage {stage}: {e}") from e
        if note:
            notes.append(note)
    _write_manifest(out, cfg, notes)
    if "drone-scenario" in stages:
        write_summary(out, quiet=True)
    return out


def _write_manifest(out: Path, cfg: ExperimentConfig, notes: list) -> None:
    lines = [
        f"config_sha256={config_hash(cfg)}",
        f"kind={cfg.kind}",
        f"numpy_version={np.__version__}",
        f"python_version={platform.python_version()}",
        f"seeds={','.join(str(s) for s in cfg.seeds)}",
        f"wclab_version={__version__}",
    ]
    lines.extend(f"note={n}" for n in notes)
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# summary


def _summary_columns() -> list:
    cols = ["drone", "snapshot"]
    for param in _SUMMARY_PARAMS:
        cols.extend([f"{param}_target", f"{param}_conducted", f"{param}_ota"])
    cols.extend(["psp_pct_conducted", "psp_pct_ota"])
    return cols


def _read_csv_rows(path: Path) -> list:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _median_or_blank(values: list) -> str:
    return f"{statistics.median(values):.6f}" if values else ""


def write_summary(bundle_dir, quiet: bool = False) -> str:
    """Condense a bundle into summary.csv and summary.txt at its root.

    The machine CSV holds one row per (target index, snapshot) with
    target/conducted/ota columns; estimates and PSP are medians over the
    bundle's seeds. The text file mirrors it in aligned columns and appends
    any stage reports (conditioning tables, assembly residual) found in the
    bundle. An empty bundle yields just the header.
    """
    out = Path(bundle_dir)
    if not out.is_dir():
        raise ConfigError(f"bundle directory not found: {out}")

    targets_cfg = {}
    snapshot_order = []
    echo = out / "config_echo.yaml"
    if echo.is_file():
        cfg_raw = yaml.safe_load(echo.read_text())
        for snap in cfg_raw.get("scenario", {}).get("snapshots", []) or []:
            label = snap["label"]
            snapshot_order.append(label)
            for ti, t in enumerate(snap.get("targets", [])):
                targets_cfg[(label, ti)] = {
                    "range_m": t["range_m"],
                    "velocity_mps": t["velocity_mps"],
                    "elevation_deg": t["elevation_deg"],
                    "azimuth_deg": t["azimuth_deg"],
                    "gain_db": t["gain_db"],
                }

    est = {}
    psp_vals = {}
    keys = set()
    est_path = out / "drone" / "estimates.csv"
    if est_path.is_file():
        for row in _read_csv_rows(est_path):
            key = (row["snapshot"], int(row["target_index"]))
            if row["snapshot"] not in snapshot_order:
                snapshot_order.append(row["snapshot"])
            keys.add(key)
            for param in _SUMMARY_PARAMS:
                est.setdefault((*key, row["mode"], param), []).append(float(row[param]))
    psp_path = out / "drone" / "psp.csv"
    if psp_path.is_file():
        for row in _read_csv_rows(psp_path):
            key = (row["snapshot"], int(row["target_index"]), row["mode"])
            psp_vals.setdefault(key, []).append(float(row["psp_pct"]))

    columns = _summary_columns()
    data_rows = []
    for label in snapshot_order:
        for ti in sorted({k[1] for k in keys if k[0] == label}):
            cfg_t = targets_cfg.get((label, ti), {})
            cells = [str(ti + 1), label]
            for param in _SUMMARY_PARAMS:
                tv = cfg_t.get(param)
                cells.append("" if tv is None else f"{tv:.6f}")
                cells.append(_median_or_blank(est.get((label, ti, "conducted", param), [])))
                cells.append(_median_or_blank(est.get((label, ti, "ota", param), [])))
            cells.append(_median_or_blank(psp_vals.get((label, ti, "conducted"), [])))
            cells.append(_median_or_blank(psp_vals.get((label, ti, "ota"), [])))
            data_rows.append(cells)

    csv_text = ",".join(columns) + "\n" + "".join(",".join(r) + "\n" for r in data_rows)
    (out / "summary.csv").write_text(csv_text)

    widths = [max(len(c), *(len(r[i]) for r in data_rows)) if data_rows else len(c)
              for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    for r in data_rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    text = "\n".join(lines) + "\n"

    for title, rel in (
        ("distance-sweep conditioning", Path("distance_sweep") / "conditioning.csv"),
        ("distance-sweep isolation", Path("distance_sweep") / "isolation_summary.csv"),
        ("synthetic-array report", Path("synthetic_array") / "report.csv"),
        ("pattern-comparison conditioning", Path("pattern_comparison") / "conditioning.csv"),
    ):
        p = out / rel
        if p.is_file():
            text += f"\n[{title}]\n{p.read_text()}"

    (out / "summary.txt").write_text(text)
    if not quiet:
        print(text, end="", flush=True)
    return text
