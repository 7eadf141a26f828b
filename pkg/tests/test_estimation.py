"""Tests for range-velocity maps, peak detection, slicing, PAS, PSP, gains."""
import math

import numpy as np
import pytest

from wclab.emulation import Scenario, TargetState, generate_cfr_dataset
from wclab.errors import DimensionError, ParameterError
from wclab.estimation import (
    PasGrid,
    PeakList,
    RangeVelocityMap,
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
from wclab.geometry import C0, Direction, UpaGeometry, steering_vector

FREQ = 3.5e9
LAM = C0 / FREQ


def geom_4x8():
    return UpaGeometry(rows=4, cols=8, spacing_m=LAM / 2)


def scenario_with(targets, n_time=200, n_freq=201):
    return Scenario(num_time=n_time, num_freq=n_freq, snapshots=[("t", list(targets))])


def make_map(power_db, range_step=1.0, vel_step=1.0, vel_start=None):
    """Hand-built map for detector tests; grid rows = velocity, cols = range."""
    p = np.asarray(power_db, dtype=float)
    n_vel, n_range = p.shape
    if vel_start is None:
        vel_start = -(n_vel // 2) * vel_step
    return RangeVelocityMap(
        power_db=p,
        range_axis_m=np.arange(n_range) * range_step,
        velocity_axis_mps=vel_start + np.arange(n_vel) * vel_step,
        zero_pad_factor=1,
        peak_power_db=0.0,
    )


class TestRangeVelocityMap:
    def test_single_target_peak_location(self):
        sc = scenario_with([TargetState(50.0, 0.0, 0.0, 0.0, 0.0)])
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0)
        iv, ir = np.unravel_index(np.argmax(m.power_db), m.power_db.shape)
        bin_m = C0 / (2 * sc.bandwidth_hz)
        assert abs(m.range_axis_m[ir] - 50.0) <= bin_m
        assert abs(m.velocity_axis_mps[iv]) <= 1e-6

    def test_velocity_axis_span(self):
        sc = scenario_with([TargetState(50.0, 0.0, 0.0, 0.0, 0.0)], 64, 65)
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0, zero_pad=1)
        span = sc.unambiguous_velocity_mps
        assert m.velocity_axis_mps[0] == pytest.approx(-span)
        step = m.velocity_axis_mps[1] - m.velocity_axis_mps[0]
        assert m.velocity_axis_mps[-1] == pytest.approx(span - step)
        assert m.range_axis_m[0] == 0.0

    def test_static_scene_energy_in_zero_doppler_row(self):
        sc = scenario_with(
            [TargetState(40.0, 0.0, 0.0, 0.0, 0.0), TargetState(90.0, 0.0, 0.0, 0.0, -6.0)],
            64, 65,
        )
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0, zero_pad=1)
        row_power = np.sum(10 ** (m.power_db / 10), axis=1)
        zero_row = int(np.argmin(np.abs(m.velocity_axis_mps)))
        assert np.argmax(row_power) == zero_row
        assert row_power[zero_row] / np.sum(row_power) > 0.99

    def test_two_targets_recovered(self):
        sc = scenario_with(
            [TargetState(50.0, 7.0, 0.0, 0.0, 0.0), TargetState(155.0, 5.0, 0.0, 0.0, -6.0)],
            250, 251,
        )
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0)
        peaks = detect_peaks(m, max_peaks=2, min_separation_bins=8, floor_db=-40.0)
        assert len(peaks) == 2
        got = sorted((p[0], p[1]) for p in peaks)
        bin_m = C0 / (2 * sc.bandwidth_hz)
        assert abs(got[0][0] - 50.0) <= bin_m
        assert abs(got[0][1] - 7.0) <= 0.1
        assert abs(got[1][0] - 155.0) <= bin_m
        assert abs(got[1][1] - 5.0) <= 0.1

    def test_max_range_crop(self):
        sc = scenario_with([TargetState(50.0, 0.0, 0.0, 0.0, 0.0)], 32, 33)
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0, zero_pad=1, max_range_m=200.0)
        assert m.range_axis_m[-1] <= 200.0
        assert m.range_axis_m.size > 0

    def test_parseval_no_padding(self):
        sc = scenario_with(
            [TargetState(33.0, 2.0, 10.0, -5.0, 0.0), TargetState(71.0, -4.0, 0.0, 15.0, -3.0)],
            32, 33,
        )
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 3, zero_pad=1)
        map_power = np.sum(10 ** ((m.power_db + m.peak_power_db) / 10))
        slice_power = np.sum(np.abs(ds.values[:, :, 3]) ** 2)
        assert map_power == pytest.approx(slice_power, rel=1e-9)

    def test_bad_element_index(self):
        sc = scenario_with([TargetState(50.0, 0.0, 0.0, 0.0, 0.0)], 8, 9)
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        with pytest.raises(DimensionError):
            range_velocity_map(ds, 32)

    def test_unknown_window(self):
        sc = scenario_with([TargetState(50.0, 0.0, 0.0, 0.0, 0.0)], 8, 9)
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        with pytest.raises(ParameterError):
            range_velocity_map(ds, 0, window="blackman")


class TestDetectPeaks:
    def test_single_injected_peak(self):
        grid = np.full((16, 16), -60.0)
        grid[5, 9] = 0.0
        peaks = detect_peaks(make_map(grid), max_peaks=3, min_separation_bins=2,
                             floor_db=-30.0)
        assert len(peaks) == 1
        r, v, p = peaks[0]
        assert r == pytest.approx(9.0)
        assert v == pytest.approx(-3.0)  # row 5 of 16 with start -8

    def test_two_peaks_in_power_order(self):
        grid = np.full((24, 24), -80.0)
        grid[4, 4] = -3.0
        grid[4, 14] = 0.0
        peaks = detect_peaks(make_map(grid), max_peaks=5, min_separation_bins=3,
                             floor_db=-30.0)
        assert len(peaks) == 2
        assert peaks[0][2] > peaks[1][2]
        assert peaks[0][0] == pytest.approx(14.0)

    def test_floor_excludes_everything(self):
        grid = np.full((8, 8), -50.0)
        grid[2, 2] = -20.0
        peaks = detect_peaks(make_map(grid), max_peaks=4, min_separation_bins=2,
                             floor_db=-10.0)
        assert len(peaks) == 0

    def test_tie_breaks_by_lower_range_then_velocity(self):
        grid = np.full((9, 9), -70.0)
        grid[6, 2] = 0.0  # same power, lower range
        grid[1, 7] = 0.0
        peaks = detect_peaks(make_map(grid), max_peaks=1, min_separation_bins=1,
                             floor_db=-30.0)
        assert peaks[0][0] == pytest.approx(2.0)

    def test_exclusion_zone_respected(self):
        grid = np.full((16, 16), -80.0)
        grid[8, 8] = 0.0
        grid[8, 10] = -1.0  # inside a 3-bin exclusion zone of the first peak
        peaks = detect_peaks(make_map(grid), max_peaks=4, min_separation_bins=3,
                             floor_db=-30.0)
        assert len(peaks) == 1

    def test_subbin_refinement(self):
        # discrete samples of a parabola peaking at range bin 7.3
        x = np.arange(16, dtype=float)
        grid = np.tile(-2.0 * (x - 7.3) ** 2, (5, 1))
        grid = grid + (-0.5 * (np.arange(5)[:, None] - 2.0) ** 2)
        peaks = detect_peaks(make_map(grid), max_peaks=1, min_separation_bins=2,
                             floor_db=-200.0)
        r, v, p = peaks[0]
        assert r == pytest.approx(7.3, abs=1e-6)
        assert v == pytest.approx(-2.0 + 2.0, abs=1e-6)


class TestTargetSliceCir:
    def on_bin_range(self, sc, m):
        df = sc.bandwidth_hz / (sc.num_freq - 1)
        return m * C0 / (2 * sc.num_freq * df)

    def test_broadside_equal_magnitudes(self):
        sc = scenario_with([], 32, 101)
        r = self.on_bin_range(sc, 15)
        sc.snapshots = [("t", [TargetState(r, 0.0, 0.0, 0.0, 0.0)])]
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        h = target_slice_cir(ds, r)
        assert np.allclose(np.abs(h), np.abs(h[0]), rtol=1e-9)

    def test_phase_pattern_matches_two_way_steering(self):
        sc = scenario_with([], 32, 101)
        r = self.on_bin_range(sc, 15)
        sc.snapshots = [("t", [TargetState(r, 0.0, 35.0, 25.0, 0.0)])]
        g = geom_4x8()
        (ds,) = generate_cfr_dataset(sc, g, mode="ideal")
        h = target_slice_cir(ds, r)
        a2 = steering_vector(g, Direction(35.0, 25.0), sc.carrier_hz) ** 2
        aligned = h / h[0] * a2[0]
        assert np.max(np.abs(aligned - a2)) < 1e-6

    def test_doppler_compensated_average(self):
        sc = scenario_with([], 64, 101)
        r = self.on_bin_range(sc, 12)
        sc.snapshots = [("t", [TargetState(r, 4.0, -20.0, 10.0, 0.0)])]
        g = geom_4x8()
        (ds,) = generate_cfr_dataset(sc, g, mode="ideal")
        h = target_slice_cir(ds, r, velocity_hint_mps=4.0)
        a2 = steering_vector(g, Direction(-20.0, 10.0), sc.carrier_hz) ** 2
        aligned = h / h[0] * a2[0]
        assert np.max(np.abs(aligned - a2)) < 1e-6

    def test_other_target_suppressed(self):
        sc = scenario_with([], 16, 101)
        r1 = self.on_bin_range(sc, 20)
        r2 = self.on_bin_range(sc, 23.5)  # worst case: straddles bins, >3 away
        sc.snapshots = [("t", [TargetState(r2, 0.0, 30.0, -40.0, 0.0)])]
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        leak = np.linalg.norm(target_slice_cir(ds, r1))
        peak = np.linalg.norm(target_slice_cir(ds, r2))
        assert 20 * math.log10(peak / leak) >= 13.0

    def test_range_outside_span_rejected(self):
        sc = scenario_with([TargetState(50.0, 0.0, 0.0, 0.0, 0.0)], 8, 11)
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        with pytest.raises(ParameterError):
            target_slice_cir(ds, 1e6)


class TestBartlettPas:
    def test_matched_two_way_peak(self):
        g = geom_4x8()
        a2 = steering_vector(g, Direction(40.0, -20.0), FREQ) ** 2
        grid = bartlett_pas(a2, g, grid_step_deg=1.0, steering="two-way", carrier_hz=FREQ)
        ie, ia = np.unravel_index(np.argmax(grid.power), grid.power.shape)
        assert grid.elevation_axis_deg[ie] == pytest.approx(40.0)
        assert grid.azimuth_axis_deg[ia] == pytest.approx(-20.0)
        assert grid.power[ie, ia] == pytest.approx(1.0, rel=1e-12)

    def test_one_way_steering_option(self):
        g = geom_4x8()
        a = steering_vector(g, Direction(10.0, 30.0), FREQ)
        grid = bartlett_pas(a, g, grid_step_deg=1.0, steering="one-way", carrier_hz=FREQ)
        ie, ia = np.unravel_index(np.argmax(grid.power), grid.power.shape)
        assert grid.elevation_axis_deg[ie] == pytest.approx(10.0)
        assert grid.azimuth_axis_deg[ia] == pytest.approx(30.0)

    def test_zero_vector_zero_grid(self):
        grid = bartlett_pas(np.zeros(32, dtype=complex), geom_4x8(), carrier_hz=FREQ)
        assert np.all(grid.power == 0.0)

    def test_scalar_invariance(self):
        g = geom_4x8()
        h = steering_vector(g, Direction(22.0, -7.0), FREQ) ** 2
        g1 = bartlett_pas(h, g, carrier_hz=FREQ)
        g2 = bartlett_pas((0.3 - 1.7j) * h, g, carrier_hz=FREQ)
        assert np.unravel_index(np.argmax(g1.power), g1.power.shape) == \
            np.unravel_index(np.argmax(g2.power), g2.power.shape)
        scale = abs(0.3 - 1.7j) ** 2
        assert np.allclose(g2.power, scale * g1.power, rtol=1e-10)

    def test_grid_covers_sector(self):
        grid = bartlett_pas(np.ones(32, dtype=complex), geom_4x8(), carrier_hz=FREQ)
        assert grid.elevation_axis_deg[0] == -60.0
        assert grid.elevation_axis_deg[-1] == 60.0
        assert grid.azimuth_axis_deg[0] == -60.0
        assert grid.azimuth_axis_deg[-1] == 60.0


class TestPsp:
    def uniform_grid(self, lo, hi, n=20):
        p = np.zeros((1, n))
        p[0, lo:hi] = 1.0
        return PasGrid(
            power=p,
            elevation_axis_deg=np.array([0.0]),
            azimuth_axis_deg=np.arange(n, dtype=float),
            grid_step_deg=1.0,
        )

    def test_identical_grids(self):
        g = self.uniform_grid(0, 10)
        assert psp(g, g) == pytest.approx(100.0)

    def test_disjoint_supports(self):
        assert psp(self.uniform_grid(0, 10), self.uniform_grid(10, 20)) == pytest.approx(0.0)

    def test_half_overlap_is_fifty(self):
        assert psp(self.uniform_grid(0, 10), self.uniform_grid(5, 15)) == pytest.approx(50.0)

    def test_symmetry_and_scaling(self):
        rng = np.random.default_rng(77)
        a = self.uniform_grid(0, 10)
        a.power = rng.uniform(0.0, 1.0, a.power.shape)
        b = self.uniform_grid(0, 10)
        b.power = rng.uniform(0.0, 1.0, b.power.shape)
        assert psp(a, b) == pytest.approx(psp(b, a))
        scaled = PasGrid(3.7 * b.power, b.elevation_axis_deg, b.azimuth_axis_deg,
                         b.grid_step_deg)
        assert psp(a, scaled) == pytest.approx(psp(a, b), abs=1e-9)

    def test_grid_mismatch(self):
        with pytest.raises(DimensionError):
            psp(self.uniform_grid(0, 10, n=20), self.uniform_grid(0, 10, n=21))


class TestRoundTripFidelity:
    def test_noise_free_recovery_within_half_bin(self):
        sc = scenario_with(
            [TargetState(50.0, 3.0, 10.0, 0.0, 0.0),
             TargetState(80.0, -6.0, 0.0, 20.0, -3.0)],
            200, 201,
        )
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0)
        peaks = detect_peaks(m, max_peaks=2, min_separation_bins=6, floor_db=-40.0)
        assert len(peaks) == 2
        range_bin = C0 / (2 * sc.bandwidth_hz)
        vel_bin = sc.wavelength_m / (2 * sc.num_time * sc.snapshot_interval_s)
        by_range = sorted((p[0], p[1]) for p in peaks)
        assert abs(by_range[0][0] - 50.0) <= range_bin / 2
        assert abs(by_range[0][1] - 3.0) <= vel_bin / 2
        assert abs(by_range[1][0] - 80.0) <= range_bin / 2
        assert abs(by_range[1][1] - (-6.0)) <= vel_bin / 2


class TestGainEstimation:
    def run_two_target_scenario(self, g1_db, g2_db):
        sc = scenario_with(
            [TargetState(50.0, 3.0, 0.0, 0.0, g1_db),
             TargetState(110.0, -5.0, 0.0, 0.0, g2_db)],
            200, 201,
        )
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0)
        # wide exclusion: the -20 dB target must not lose to the strong
        # target's range sidelobes (rectangular window, ~-18 dB at 2.3 bins)
        peaks = detect_peaks(m, max_peaks=2, min_separation_bins=40, floor_db=-60.0)
        return normalized_gain_estimate([(0, peaks)], sc)

    def test_single_target_exact(self):
        sc = scenario_with([TargetState(60.0, 2.0, 0.0, 0.0, -7.0)], 128, 129)
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0)
        peaks = detect_peaks(m, max_peaks=1, min_separation_bins=4, floor_db=-40.0)
        (est,) = normalized_gain_estimate([(0, peaks)], sc)
        assert est.gain_db == pytest.approx(-7.0, abs=1e-9)

    def test_equal_gains_stay_equal(self):
        ests = self.run_two_target_scenario(-4.0, -4.0)
        assert abs(ests[0].gain_db - ests[1].gain_db) <= 0.1

    def test_offset_gains_recovered(self):
        ests = self.run_two_target_scenario(0.0, -20.0)
        by_target = {e.target_index: e.gain_db for e in ests}
        assert by_target[0] == pytest.approx(0.0, abs=0.5)
        assert by_target[1] == pytest.approx(-20.0, abs=0.5)

    def test_wrapped_velocity_pairing(self):
        # a Nyquist-edge velocity aliases to the opposite sign but must still
        # pair with its own target
        sc = Scenario(num_time=200, num_freq=201,
                      snapshots=[("t", [TargetState(110.0, 15.0, 0.0, 0.0, 0.0)])])
        with pytest.warns(UserWarning):
            (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0)
        peaks = detect_peaks(m, max_peaks=1, min_separation_bins=4, floor_db=-40.0)
        (est,) = normalized_gain_estimate([(0, peaks)], sc)
        assert est.target_index == 0
        assert abs(abs(est.velocity_mps) - 15.0) <= 0.05


class TestPairDetections:
    def two_target_scenario(self):
        return Scenario(num_time=200, num_freq=201, snapshots=[
            ("t", [TargetState(50.0, 3.0, 0.0, 0.0, 0.0),
                   TargetState(110.0, -5.0, 0.0, 0.0, -10.0)]),
        ])

    def test_pairs_nearest_regardless_of_peak_order(self):
        peaks = PeakList("range-velocity", [(110.2, -5.1, -10.0), (49.9, 3.0, 0.0)])
        paired = pair_detections([(0, peaks)], self.two_target_scenario())
        by_target = {ti: pk for _, ti, pk in paired}
        assert by_target[0][0] == pytest.approx(49.9)
        assert by_target[1][0] == pytest.approx(110.2)

    def test_wrapped_velocity_distance(self):
        # +14.9 m/s detected as -14.9 after aliasing: wrap distance is 0.2,
        # so the alias must still beat a slow target at the same range scale
        sc = Scenario(num_time=200, num_freq=201, snapshots=[
            ("t", [TargetState(50.0, 14.9, 0.0, 0.0, 0.0),
                   TargetState(110.0, 0.0, 0.0, 0.0, 0.0)]),
        ])
        peaks = PeakList("range-velocity", [(50.0, -14.9, 0.0), (110.0, 0.0, -1.0)])
        paired = pair_detections([(0, peaks)], sc)
        by_target = {ti: pk for _, ti, pk in paired}
        assert by_target[0][1] == pytest.approx(-14.9)
        assert by_target[1][1] == pytest.approx(0.0)

    def test_count_mismatch_warns(self):
        peaks = PeakList("range-velocity", [(50.0, 3.0, 0.0)])
        with pytest.warns(UserWarning, match="1 peaks for 2 targets"):
            paired = pair_detections([(0, peaks)], self.two_target_scenario())
        assert len(paired) == 1

    def test_no_peaks_is_an_error_for_gain_estimation(self):
        empty = PeakList("range-velocity", [])
        with pytest.raises(ParameterError, match="no peaks"):
            normalized_gain_estimate([(0, empty)], self.two_target_scenario())


class TestCsvFormats:
    def test_map_csv(self, tmp_path):
        sc = scenario_with([TargetState(42.0, 1.0, 0.0, 0.0, 0.0)], 16, 17)
        (ds,) = generate_cfr_dataset(sc, geom_4x8(), mode="ideal")
        m = range_velocity_map(ds, 0, zero_pad=1)
        path = tmp_path / "map.csv"
        write_map_csv(m, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("# range_start=")
        assert "vel_start=" in lines[0]
        assert len(lines) == 1 + m.power_db.shape[0]
        assert len(lines[1].split(",")) == m.power_db.shape[1]

    def test_pas_csv(self, tmp_path):
        g = geom_4x8()
        h = steering_vector(g, Direction(10.0, 10.0), FREQ) ** 2
        grid = bartlett_pas(h, g, carrier_hz=FREQ)
        path = tmp_path / "pas.csv"
        write_pas_csv(grid, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("# el_start=")
        assert len(lines) == 1 + grid.power.shape[0]

    def test_peaks_csv(self, tmp_path):
        peaks = PeakList(domain="range-velocity",
                         entries=[(50.0, 7.0, -3.0), (155.0, 5.0, -25.0)])
        path = tmp_path / "peaks.csv"
        write_peaks_csv(peaks, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "range_m,velocity_mps,power_db"
        assert len(lines) == 3

    def test_angle_peaks_csv(self, tmp_path):
        peaks = PeakList(domain="angle", entries=[(50.0, -20.0, 0.0)])
        path = tmp_path / "apk.csv"
        write_peaks_csv(peaks, path)
        assert path.read_text().splitlines()[0] == "elevation_deg,azimuth_deg,power_db"


class TestPasPeaks:
    def test_detects_main_and_alias(self):
        g = geom_4x8()
        h = steering_vector(g, Direction(50.0, -20.0), FREQ) ** 2
        grid = bartlett_pas(h, g, carrier_hz=FREQ)
        peaks = detect_pas_peaks(grid, max_peaks=3, min_separation_deg=5.0,
                                 floor_db=-3.0)
        assert len(peaks) >= 1
        els = [p[0] for p in peaks]
        azs = [p[1] for p in peaks]
        assert any(abs(e - 50.0) <= 1.0 and abs(a - (-20.0)) <= 1.0
                   for e, a in zip(els, azs))
