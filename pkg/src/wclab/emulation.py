"""Target sensing-channel emulation and CFR dataset generation.

The ideal channel is a sum of point-target components, each a rank-one outer
product of the array steering vector with itself (every element transmits and
receives), carrying a delay phasor in frequency and a Doppler phasor in time.
The emulated channel routes the same components through a physical transfer
matrix and its measured-inverse calibration, exactly as a wireless-cable OTA
bench does; when the calibration is perfect the two coincide.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .calibration import (
    MeasurementErrorModel,
    QuantizationModel,
    invert_calibration,
    quantize_weights,
    simulate_onoff_measurement,
)
from .errors import DimensionError, ParameterError
from .geometry import C0, Direction, UpaGeometry, steering_vector
from .linalg import _as_square

CFR_MAGIC = b"WCCFR1"
ACQ_PER_ELEMENT = "per-element-monostatic"
ACQ_FIXED_REF = "fixed-reference-column"
_ACQ_CODES = {ACQ_PER_ELEMENT: 0, ACQ_FIXED_REF: 1}
_ACQ_NAMES = {v: k for k, v in _ACQ_CODES.items()}
MODES = ("ideal", "conducted", "ota")


def round_trip_delay_s(range_m: float) -> float:
    """Monostatic delay: out to the target and back."""
    return 2.0 * range_m / C0


def round_trip_doppler_hz(radial_velocity_mps: float, carrier_hz: float) -> float:
    """Monostatic Doppler shift 2 v / lambda."""
    return 2.0 * radial_velocity_mps * carrier_hz / C0


@dataclass(frozen=True)
class TargetState:
    """One point target: range, radial velocity, direction, and channel gain."""

    range_m: float
    radial_velocity_mps: float
    elevation_deg: float
    azimuth_deg: float
    gain_db: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise ParameterError(f"range_m must be > 0: {self.range_m}")
        Direction(self.elevation_deg, self.azimuth_deg)  # range-check the angles

    @property
    def direction(self) -> Direction:
        return Direction(self.elevation_deg, self.azimuth_deg)


@dataclass
class Scenario:
    """Waveform/sampling parameters plus per-snapshot target lists."""

    carrier_hz: float = 3.5e9
    bandwidth_hz: float = 40e6
    num_freq: int = 1001
    num_time: int = 1000
    snapshot_interval_s: float = 1.0 / 700.0
    snapshots: list = field(default_factory=list)

    def __post_init__(self):
        if self.num_freq < 2:
            raise ParameterError(f"num_freq must be >= 2: {self.num_freq}")
        if self.num_time < 2:
            raise ParameterError(f"num_time must be >= 2: {self.num_time}")
        if self.snapshot_interval_s <= 0:
            raise ParameterError(
                f"snapshot_interval_s must be > 0: {self.snapshot_interval_s}"
            )
        if self.carrier_hz <= 0 or self.bandwidth_hz <= 0:
            raise ParameterError("carrier_hz and bandwidth_hz must be > 0")

    @property
    def wavelength_m(self) -> float:
        return C0 / self.carrier_hz

    @property
    def time_axis_s(self) -> np.ndarray:
        return np.arange(self.num_time) * self.snapshot_interval_s

    @property
    def baseband_freq_hz(self) -> np.ndarray:
        return np.linspace(-self.bandwidth_hz / 2, self.bandwidth_hz / 2, self.num_freq)

    @property
    def unambiguous_velocity_mps(self) -> float:
        """Largest radial speed representable without Doppler aliasing."""
        return self.wavelength_m / (4.0 * self.snapshot_interval_s)


@dataclass(eq=False)
class CfrDataset:
    """Measured channel frequency response: (time, frequency, element) tensor."""

    values: np.ndarray
    time_axis_s: np.ndarray
    freq_axis_hz: np.ndarray
    carrier_hz: float
    bandwidth_hz: float
    snapshot_interval_s: float
    acquisition_mode: str = ACQ_PER_ELEMENT

    @property
    def element_count(self) -> int:
        return self.values.shape[2]


def rts_term(t: TargetState, time_s, baseband_freq_hz, carrier_hz: float):
    """Gain/Doppler/delay phasor of one target: G e^{j2 pi nu t} e^{j2 pi f tau}."""
    g = 10 ** (t.gain_db / 20)
    nu = round_trip_doppler_hz(t.radial_velocity_mps, carrier_hz)
    tau = round_trip_delay_s(t.range_m)
    return (
        g
        * np.exp(2j * np.pi * nu * np.asarray(time_s))
        * np.exp(2j * np.pi * tau * np.asarray(baseband_freq_hz))
    )


def ideal_sensing_channel(targets, geom: UpaGeometry, time_s: float,
                          baseband_freq_hz: float, carrier_hz: float) -> np.ndarray:
    """Sum of rank-one target components at one (time, frequency) point."""
    k = geom.element_count
    h = np.zeros((k, k), dtype=complex)
    for t in targets:
        a = steering_vector(geom, t.direction, carrier_hz)
        h += rts_term(t, time_s, baseband_freq_hz, carrier_hz) * np.outer(a, a)
    return h


def apm_weight_vectors(calib, direction: Direction, geom: UpaGeometry,
                       freq_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Transmit/receive weight vectors that steer through the calibration."""
    m = _as_square(calib)
    if m.shape[0] != geom.element_count:
        raise DimensionError(
            f"calibration is {m.shape[0]}x{m.shape[0]} but array has "
            f"{geom.element_count} elements"
        )
    a = steering_vector(geom, direction, freq_hz)
    return m @ a, a @ m


def _effective_target_amplitudes(targets, geom, carrier_hz, mode, c_phys,
                                 calib, quant, acquisition) -> np.ndarray:
    """Per-target K-vector of amplitudes after the acquisition reduction.

    The emulated channel for one target is outer(e_tx, e_rx) with
    e_tx = C @ quant(calib @ a) and e_rx = quant(a @ calib) @ C; ideal mode
    short-circuits both to the steering vector itself.
    """
    k = geom.element_count
    amps = np.zeros((len(targets), k), dtype=complex)
    for n, t in enumerate(targets):
        a = steering_vector(geom, t.direction, carrier_hz)
        if mode == "ideal":
            e_tx, e_rx = a, a
        else:
            tx = calib @ a
            rx = a @ calib
            if quant is not None:
                tx = quantize_weights(tx, quant)
                rx = quantize_weights(rx, quant)
            e_tx = c_phys @ tx
            e_rx = rx @ c_phys
        if acquisition == ACQ_PER_ELEMENT:
            amps[n] = e_tx * e_rx  # diagonal of the outer product
        else:
            amps[n] = e_tx * e_rx[0]  # column 0 of the outer product
    return amps


def generate_cfr_dataset(
    scenario: Scenario,
    geom: UpaGeometry,
    mode: str = "ideal",
    physical_c=None,
    err: MeasurementErrorModel | None = None,
    quant: QuantizationModel | None = None,
    acquisition: str = ACQ_PER_ELEMENT,
) -> list[CfrDataset]:
    """Generate one CFR dataset per scenario snapshot.

    mode "ideal" evaluates the target channel directly; "ota" routes it
    through physical_c with a measured (err) and inverted calibration and
    quantized weights; "conducted" is ota with the identity matrix in place
    of physical_c. Calibration is measured once and reused for all snapshots.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    if acquisition not in _ACQ_CODES:
        raise ParameterError(
            f"unknown acquisition {acquisition!r}; expected one of {tuple(_ACQ_CODES)}"
        )
    k = geom.element_count
    c_phys = None
    calib = None
    if mode != "ideal":
        if mode == "ota":
            if physical_c is None:
                raise ParameterError("ota mode requires physical_c")
            c_phys = _as_square(physical_c)
            if c_phys.shape[0] != k:
                raise DimensionError(
                    f"physical_c is {c_phys.shape[0]}x{c_phys.shape[0]} but array "
                    f"has {k} elements"
                )
        else:
            c_phys = np.eye(k, dtype=complex)
        c_hat = simulate_onoff_measurement(
            c_phys, err if err is not None else MeasurementErrorModel(None)
        )
        calib = invert_calibration(c_hat)

    datasets = []
    for label, targets in scenario.snapshots:
        datasets.append(
            _generate_snapshot(scenario, targets, geom, mode, c_phys, calib,
                               quant, acquisition)
        )
    return datasets


def _generate_snapshot(scenario, targets, geom, mode, c_phys, calib, quant,
                       acquisition) -> CfrDataset:
    t_axis = scenario.time_axis_s
    f_axis = scenario.baseband_freq_hz
    k = geom.element_count
    v_max = scenario.unambiguous_velocity_mps
    for t in targets:
        if abs(t.radial_velocity_mps) >= v_max * (1 - 1e-9):
            warnings.warn(
                f"radial velocity {t.radial_velocity_mps} m/s is at or beyond the "
                f"unambiguous span +/-{v_max:.4f} m/s and will alias in velocity",
                UserWarning,
                stacklevel=3,
            )
    amps = _effective_target_amplitudes(
        targets, geom, scenario.carrier_hz, mode, c_phys, calib, quant, acquisition
    )
    values = np.zeros((scenario.num_time, scenario.num_freq, k), dtype=complex)
    for n, t in enumerate(targets):
        g = 10 ** (t.gain_db / 20)
        nu = round_trip_doppler_hz(t.radial_velocity_mps, scenario.carrier_hz)
        tau = round_trip_delay_s(t.range_m)
        doppler = g * np.exp(2j * np.pi * nu * t_axis)  # (N_t,)
        delay = np.exp(2j * np.pi * tau * f_axis)  # (N_f,)
        values += doppler[:, None, None] * (delay[:, None] * amps[n])[None, :, :]
    return CfrDataset(
        values=values,
        time_axis_s=t_axis,
        freq_axis_hz=scenario.carrier_hz + f_axis,
        carrier_hz=scenario.carrier_hz,
        bandwidth_hz=scenario.bandwidth_hz,
        snapshot_interval_s=scenario.snapshot_interval_s,
        acquisition_mode=acquisition,
    )


_HEADER = struct.Struct("<III d d d B")


def write_cfr_binary(ds: CfrDataset, path) -> None:
    """Persist a CFR dataset: 43-byte little-endian header + raw complex data.

    Layout: magic `WCCFR1`, u32 N_t/N_f/K, f64 carrier/bandwidth/dt, u8
    acquisition code, then N_t*N_f*K complex entries as (re, im) f64 pairs,
    time-major, then frequency, then element.
    """
    n_t, n_f, k = ds.values.shape
    with open(path, "wb") as f:
        f.write(CFR_MAGIC)
        f.write(
            _HEADER.pack(
                n_t, n_f, k,
                ds.carrier_hz, ds.bandwidth_hz, ds.snapshot_interval_s,
                _ACQ_CODES[ds.acquisition_mode],
            )
        )
        np.ascontiguousarray(ds.values, dtype="<c16").tofile(f)


def read_cfr_binary(path) -> CfrDataset:
    """Read a dataset written by write_cfr_binary."""
    with open(path, "rb") as f:
        magic = f.read(len(CFR_MAGIC))
        if magic != CFR_MAGIC:
            raise ParameterError(f"{path}: not a CFR file (bad magic {magic!r})")
        header = f.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ParameterError(f"{path}: truncated CFR header")
        n_t, n_f, k, carrier, bandwidth, dt, acq_code = _HEADER.unpack(header)
        if acq_code not in _ACQ_NAMES:
            raise ParameterError(f"{path}: unknown acquisition code {acq_code}")
        data = np.fromfile(f, dtype="<c16", count=n_t * n_f * k)
    if data.size != n_t * n_f * k:
        raise ParameterError(f"{path}: truncated CFR payload")
    return CfrDataset(
        values=data.reshape(n_t, n_f, k),
        time_axis_s=np.arange(n_t) * dt,
        freq_axis_hz=carrier + np.linspace(-bandwidth / 2, bandwidth / 2, n_f),
        carrier_hz=carrier,
        bandwidth_hz=bandwidth,
        snapshot_interval_s=dt,
        acquisition_mode=_ACQ_NAMES[acq_code],
    )
