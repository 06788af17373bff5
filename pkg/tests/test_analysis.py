import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from schemas.domain import DriveProtocol, TimeSeries
from services.analysis_service import (
    PhaseCell,
    PhaseDiagram,
    analyze_series,
    fit_combined_heating,
    fit_power_law,
    heating_time,
    period_doubling_magnitude,
    phase_diagram,
    phase_estimate,
    phase_trace,
    rigidity_extent,
    seed_spread,
    stroboscopic_spectrum,
)
from tests.helpers import free_spins
from utils.errors import FitError, ThresholdNotReachedError, UndefinedPhaseError

PROTOCOL = DriveProtocol(tau=0.5, N=4, M=40, noise_seed=0)


def synthetic(values) -> TimeSeries:
    values = np.asarray(values, dtype=np.float64)
    return TimeSeries.from_cycle_values(values, PROTOCOL.model_copy(update={"M": len(values) - 1}))


def test_heating_time_interpolates_the_crossing():
    series = synthetic(np.exp(-np.arange(41) / 10.0))
    lifetime = heating_time(series)
    assert lifetime.cycles == pytest.approx(10.0, abs=1e-9)
    assert lifetime.kicks == pytest.approx(10.0 * PROTOCOL.kicks_per_cycle, abs=1e-8)
    assert lifetime.time == pytest.approx(10.0 * PROTOCOL.period, abs=1e-9)


def test_heating_time_scales_with_initial_magnitude():
    series = synthetic(0.5 * np.exp(-np.arange(41) / 10.0))
    assert heating_time(series).cycles == pytest.approx(10.0, abs=1e-9)


@pytest.mark.parametrize("scale", [0.5, 3.0, 17.0])
def test_heating_time_follows_time_dilation(scale):
    values = np.exp(-np.arange(41) / 7.5)
    times = np.linspace(0.0, 40.0 * PROTOCOL.period, 41)
    base = TimeSeries.from_cycle_values(values, PROTOCOL, times=times)
    dilated = TimeSeries.from_cycle_values(values, PROTOCOL, times=scale * times)
    assert heating_time(dilated).time == pytest.approx(scale * heating_time(base).time, rel=1e-12)
    assert heating_time(dilated).cycles == heating_time(base).cycles


def test_heating_time_not_reached():
    with pytest.raises(ThresholdNotReachedError):
        heating_time(synthetic(np.ones(20)))


def test_heating_time_rectification():
    k = np.arange(41)
    series = synthetic((-1.0) ** k * np.exp(-k / 100.0))
    assert heating_time(series, rectify="none").cycles < 1.0
    with pytest.raises(ThresholdNotReachedError):
        heating_time(series, rectify="absolute")


def test_combined_heating_fit_recovers_parameters():
    g, lam, gamma_min, N = 0.5, 2.0, 1e-4, 50
    eps = np.logspace(-2, -0.5, 8)
    lifetimes = 1.0 / (g / N * eps ** lam + gamma_min)
    fit = fit_combined_heating(eps, lifetimes, N)
    assert fit.lam == pytest.approx(lam, rel=1e-6)
    assert fit.g == pytest.approx(g, rel=1e-6)
    assert fit.gamma_min == pytest.approx(gamma_min, rel=1e-6)
    assert fit.g_quadratic == pytest.approx(g, rel=1e-6)
    assert fit.gamma_min_quadratic == pytest.approx(gamma_min, rel=1e-6)
    assert fit.points == 8


@pytest.mark.parametrize(
    "eps, lifetimes",
    [
        ([0.1, 0.2, 0.3], [10.0, 5.0, 2.0]),
        ([0.1, -0.2, 0.3, 0.4], [10.0, 5.0, 2.0, 1.0]),
        ([0.1, 0.1, 0.1, 0.1], [10.0, 5.0, 2.0, 1.0]),
    ],
)
def test_combined_heating_fit_rejects_bad_input(eps, lifetimes):
    with pytest.raises(FitError):
        fit_combined_heating(eps, lifetimes, 10)


def test_power_law_fit():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_power_law(x, 3.0 * x ** -2.0)
    assert fit.exponent == pytest.approx(-2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-10)


def test_power_law_fit_rejects_degenerate_input():
    with pytest.raises(FitError):
        fit_power_law([2.0, 2.0], [1.0, 3.0])
    with pytest.raises(FitError):
        fit_power_law([1.0], [1.0])


def test_alternating_signal_peaks_at_half_drive_frequency():
    M, period = 16, 0.7
    spectrum = stroboscopic_spectrum((-1.0) ** np.arange(1, M + 1), period)
    assert spectrum.peak_frequency() == pytest.approx(math.pi / period)
    assert period_doubling_magnitude(spectrum) == pytest.approx(M)
    assert spectrum.magnitude_at(0.0) == pytest.approx(0.0, abs=1e-12)


def test_spectrum_of_real_series_is_conjugate_symmetric():
    values = np.random.default_rng(5).standard_normal(37)
    amplitudes = stroboscopic_spectrum(values, 0.4).amplitudes
    mirrored = np.conj(amplitudes[(-np.arange(37)) % 37])
    assert np.max(np.abs(amplitudes - mirrored)) < 1e-12


def test_spectrum_satisfies_parseval():
    values = np.random.default_rng(6).standard_normal(64)
    spectrum = stroboscopic_spectrum(values, 1.3)
    power = np.sum(spectrum.magnitude ** 2) / values.size
    assert power == pytest.approx(np.sum(values ** 2), rel=1e-10)


def test_spectrum_needs_two_records():
    with pytest.raises(ValueError):
        stroboscopic_spectrum([1.0], 1.0)


def grid_spectra(amplitudes, M=8, period=1.0):
    signal = (-1.0) ** np.arange(1, M + 1)
    return [stroboscopic_spectrum(a * signal, period) for a in amplitudes]


def test_rigidity_extent_of_single_cell_peak():
    h = 0.1
    gammas = math.pi + h * np.arange(-5, 6)
    amplitudes = np.where(np.arange(-5, 6) == 0, 1.0, 0.0)
    spectra = grid_spectra(amplitudes)
    cells = rigidity_extent(gammas, spectra, threshold=0.2, method="cells")
    assert cells.width == pytest.approx(h)
    interpolated = rigidity_extent(gammas, spectra, threshold=0.2)
    assert interpolated.width == pytest.approx(1.6 * h)
    assert interpolated.lower == pytest.approx(math.pi - 0.8 * h)


def test_rigidity_extent_grows_with_plateau():
    gammas = math.pi + 0.1 * np.arange(-5, 6)
    narrow = rigidity_extent(gammas, grid_spectra(np.exp(-((gammas - math.pi) / 0.1) ** 2)))
    wide = rigidity_extent(gammas, grid_spectra(np.exp(-((gammas - math.pi) / 0.3) ** 2)))
    assert wide.half_width > narrow.half_width > 0.0


def test_rigidity_extent_without_peak():
    gammas = math.pi + 0.1 * np.arange(-3, 4)
    extent = rigidity_extent(gammas, grid_spectra(np.zeros(7)))
    assert not extent.peak_present
    assert extent.width == 0.0


@pytest.mark.parametrize("x, y, expected", [(-1.0, -0.0, math.pi), (0.0, 1.0, math.pi / 2), (1.0, 0.0, 0.0)])
def test_phase_estimate(x, y, expected):
    assert phase_estimate(x, y) == pytest.approx(expected)


def test_phase_estimate_undefined_at_origin():
    with pytest.raises(UndefinedPhaseError):
        phase_estimate(0.0, 0.0)


def test_seed_spread():
    spread = seed_spread({3: 12.0, 1: 10.0})
    assert spread["mean"] == pytest.approx(11.0)
    assert spread["std"] == pytest.approx(math.sqrt(2.0))
    assert spread["graphs"] == 2.0


def test_analyze_series_single_cycle_has_no_spectrum():
    cell = analyze_series(synthetic([1.0, 0.9]))
    assert cell.spectrum is None
    assert cell.lifetime is None
    assert cell.lifetime_error


def test_heatmap_frame_marks_failed_cells():
    good = PhaseCell(gamma=math.pi, series=synthetic([1.0, -0.5, 0.25]))
    failed = PhaseCell(gamma=0.5, error="boom")
    frame = PhaseDiagram(cells=[good, failed]).heatmap_frame()
    assert frame.index.name == "cycle"
    assert frame[repr(math.pi)].tolist() == [1.0, 0.5, 0.25]
    assert frame[repr(0.5)].isna().all()


def test_phase_diagram_of_free_spins():
    protocol = DriveProtocol(tau=0.2, N=4, M=8, noise_seed=0)
    diagram = phase_diagram(free_spins(2), protocol, [math.pi, math.pi / 2])
    assert diagram.gammas == [math.pi, math.pi / 2]
    at_pi, at_half = (period_doubling_magnitude(cell.spectrum) for cell in diagram.cells)
    assert at_pi == pytest.approx(8.0, abs=1e-9)
    assert at_half == pytest.approx(0.0, abs=1e-9)
    assert diagram.spectra_frame().columns[0] == "omega"


def test_phase_trace_marks_undefined_phases():
    series = TimeSeries.from_cycle_values(
        np.array([1.0, 0.0, -1.0]), PROTOCOL.model_copy(update={"M": 2}), y_values=np.array([0.0, 0.0, 0.0])
    )
    trace = phase_trace(series)
    assert trace[0] == 0.0
    assert math.isnan(trace[1])
    assert trace[2] == pytest.approx(math.pi)


def test_phase_diagram_cells_do_not_depend_on_gamma_order(couplings4):
    protocol = DriveProtocol(tau=0.3, N=4, M=6, noise_fraction=0.05, noise_seed=2)
    gammas = [math.pi, 0.3, 2.0]
    forward = phase_diagram(couplings4, protocol, gammas)
    backward = phase_diagram(couplings4, protocol, gammas[::-1])
    for cell, mirrored in zip(forward.cells, backward.cells[::-1]):
        assert cell.gamma == mirrored.gamma
        pd.testing.assert_frame_equal(cell.series.frame, mirrored.series.frame, check_exact=True)


def test_repeated_gamma_is_rejected():
    protocol = DriveProtocol(tau=0.2, N=4, M=4, noise_seed=0)
    with pytest.raises(ValueError):
        phase_diagram(free_spins(2), protocol, [math.pi, 0.0, math.pi])
    cell = PhaseCell(gamma=math.pi, series=synthetic([1.0, -0.5]))
    with pytest.raises(ValidationError):
        PhaseDiagram(cells=[cell, cell])
