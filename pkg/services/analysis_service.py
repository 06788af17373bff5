"""
Heating times, heating-law fits, stroboscopic spectra and phase diagrams.
"""

import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats
from scipy.optimize import minimize_scalar
from threadpoolctl import threadpool_limits

from config import settings
from schemas.domain import CouplingSet, DriveProtocol, Spectrum, StateKind, TimeSeries
from schemas.response_schemas import HeatingFit, Lifetime, PowerLawFit, RigidityExtent
from services.engine_service import HamiltonianChoice, run_protocol
from utils.errors import FitError, PdtcError, ThresholdNotReachedError, UndefinedPhaseError

logger = logging.getLogger(__name__)

Rectify = Literal["none", "absolute"]


def heating_time(
    series: TimeSeries,
    threshold: float = math.exp(-1.0),
    rectify: Rectify = "absolute",
    column: str = "x",
) -> Lifetime:
    """First downward crossing of threshold·|initial| on the per-cycle samples."""
    cycles = series.cycle_frame()
    values = cycles[column].to_numpy(dtype=np.float64)
    if rectify == "absolute":
        values = np.abs(values)
    level = threshold * abs(values[0])

    below = np.flatnonzero(values < level)
    below = below[below > 0]
    if below.size == 0:
        raise ThresholdNotReachedError()
    k = int(below[0])
    fraction = (values[k - 1] - level) / (values[k - 1] - values[k])

    def at(name: str) -> float:
        column_values = cycles[name].to_numpy(dtype=np.float64)
        return float(column_values[k - 1] + fraction * (column_values[k] - column_values[k - 1]))

    return Lifetime(kicks=at("kick_index"), cycles=at("cycle_index"), time=at("time"), rectify=rectify)


def _loglog_line(log_eps: np.ndarray, rates: np.ndarray, gamma_min: float) -> Tuple[float, float, float]:
    """(slope, intercept, residual sum of squares) of log(Γ - Γ_min) vs log ε."""
    log_rate = np.log(rates - gamma_min)
    slope, intercept = np.polyfit(log_eps, log_rate, 1)
    residual = log_rate - (slope * log_eps + intercept)
    return float(slope), float(intercept), float(residual @ residual)


def _quadratic_fit(eps: np.ndarray, rates: np.ndarray, N: int) -> Tuple[float, float]:
    design = np.column_stack([eps ** 2, np.ones_like(eps)])
    (a, gamma_min), *_ = np.linalg.lstsq(design, rates, rcond=None)
    if gamma_min < 0:
        gamma_min = 0.0
        a = float(eps ** 2 @ rates / (eps ** 2 @ eps ** 2))
    return float(a * N), float(gamma_min)


def fit_combined_heating(eps: Sequence[float], lifetimes: Sequence[float], N: int) -> HeatingFit:
    """Fit Γ = g/N ε^λ + Γ_min with Γ = 1/lifetime, profiling Γ_min."""
    eps = np.asarray(eps, dtype=np.float64)
    lifetimes = np.asarray(lifetimes, dtype=np.float64)
    if eps.shape != lifetimes.shape or eps.size < 4:
        raise FitError("combined heating fit needs at least 4 (ε, lifetime) points")
    if np.any(eps <= 0) or np.any(lifetimes <= 0):
        raise FitError("ε and lifetimes must be positive")
    if np.ptp(eps) == 0:
        raise FitError("degenerate input: all ε equal")

    rates = 1.0 / lifetimes
    log_eps = np.log(eps)
    floor = float(rates.min())

    # Γ_min = floor·(1 - u); log-spaced u resolves Γ_min close to the smallest rate
    log_u = np.linspace(0.0, -12.0, 241)

    def cost(lu: float) -> float:
        return _loglog_line(log_eps, rates, floor * (1.0 - 10.0 ** lu))[2]

    costs = np.array([cost(lu) for lu in log_u])
    best = int(np.argmin(costs))
    lower = log_u[min(best + 1, len(log_u) - 1)]
    upper = log_u[max(best - 1, 0)]
    if lower < upper:
        refined = minimize_scalar(cost, bounds=(lower, upper), method="bounded", options={"xatol": 1e-12})
        best_lu = float(refined.x) if refined.fun <= costs[best] else float(log_u[best])
    else:
        best_lu = float(log_u[best])

    gamma_min = floor * (1.0 - 10.0 ** best_lu)
    slope, intercept, rss = _loglog_line(log_eps, rates, gamma_min)
    g_quadratic, gamma_min_quadratic = _quadratic_fit(eps, rates, N)
    fit = HeatingFit(
        g=float(N * math.exp(intercept)),
        lam=slope,
        gamma_min=max(gamma_min, 0.0),
        residual_norm=math.sqrt(rss),
        N=N,
        points=int(eps.size),
        g_quadratic=g_quadratic,
        gamma_min_quadratic=gamma_min_quadratic,
    )
    logger.info(f"Combined heating fit: g={fit.g:.4g} lambda={fit.lam:.4g} gamma_min={fit.gamma_min:.4g}")
    return fit


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> PowerLawFit:
    """Least-squares slope of log y vs log x with its standard error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or x.shape != y.shape:
        raise FitError("power-law fit needs at least two paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive data")
    if np.ptp(x) == 0:
        raise FitError("degenerate input: all x equal")
    result = stats.linregress(np.log(x), np.log(y))
    stderr = float(result.stderr) if x.size > 2 else 0.0
    return PowerLawFit(
        exponent=float(result.slope), stderr=stderr, intercept=float(result.intercept), points=int(x.size)
    )


def stroboscopic_spectrum(values: Sequence[float], period: float) -> Spectrum:
    """A(ω_k) = Σ_j e^{-iω_k jT} v_j with ω_k = 2πk/(MT)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError("spectrum needs at least two cycle records")
    M = values.size
    return Spectrum(
        frequencies=2.0 * math.pi * np.arange(M) / (M * period),
        amplitudes=np.fft.fft(values),
        period=period,
    )


def series_spectrum(series: TimeSeries, column: str = "x_mean") -> Spectrum:
    """Spectrum of the per-cycle observable, excluding the initial record."""
    values = series.cycle_frame()[column].to_numpy()[1:]
    return stroboscopic_spectrum(values, series.protocol.period)


def period_doubling_magnitude(spectrum: Spectrum) -> float:
    return spectrum.magnitude_at(math.pi / spectrum.period)


def rigidity_extent(
    gammas: Sequence[float],
    spectra: Sequence[Spectrum],
    threshold: Optional[float] = None,
    method: Literal["interpolate", "cells"] = "interpolate",
    center: float = math.pi,
) -> RigidityExtent:
    """Half-width of the contiguous γ interval around π where the π/T peak stays above threshold."""
    threshold = settings.RIGIDITY_THRESHOLD if threshold is None else threshold
    gammas = np.asarray(gammas, dtype=np.float64)
    peaks = np.array([period_doubling_magnitude(s) for s in spectra])
    order = np.argsort(gammas)
    gammas, peaks = gammas[order], peaks[order]
    spacing = float(gammas[1] - gammas[0]) if gammas.size > 1 else 0.0

    start = int(np.argmin(np.abs(gammas - center)))
    level = threshold * peaks.max() if peaks.size else 0.0
    if peaks.size == 0 or peaks.max() == 0.0 or peaks[start] < level:
        logger.warning("No period-doubling peak near the centre of the γ grid; rigidity extent is zero")
        return RigidityExtent(half_width=0.0, width=0.0, lower=center, upper=center, peak_present=False, method=method)

    right = start
    while right + 1 < gammas.size and peaks[right + 1] >= level:
        right += 1
    left = start
    while left - 1 >= 0 and peaks[left - 1] >= level:
        left -= 1

    if method == "cells":
        lower, upper = gammas[left] - spacing / 2, gammas[right] + spacing / 2
    else:
        lower, upper = gammas[left], gammas[right]
        if right + 1 < gammas.size:
            f = (peaks[right] - level) / (peaks[right] - peaks[right + 1])
            upper = gammas[right] + f * (gammas[right + 1] - gammas[right])
        if left - 1 >= 0:
            f = (peaks[left] - level) / (peaks[left] - peaks[left - 1])
            lower = gammas[left] - f * (gammas[left] - gammas[left - 1])

    width = float(upper - lower)
    return RigidityExtent(half_width=width / 2, width=width, lower=float(lower), upper=float(upper), method=method)


def phase_estimate(x: float, y: float) -> float:
    """Four-quadrant phase in (-π, π]."""
    if math.hypot(x, y) < settings.PHASE_UNDEFINED_TOL:
        raise UndefinedPhaseError()
    phi = math.atan2(y, x)
    return math.pi if phi == -math.pi else phi


def phase_trace(series: TimeSeries) -> np.ndarray:
    phases = []
    for x, y in zip(series.frame["x"], series.frame["y"]):
        try:
            phases.append(phase_estimate(float(x), float(y)))
        except UndefinedPhaseError:
            phases.append(math.nan)
    return np.array(phases)


def seed_spread(lifetimes: Dict[int, float]) -> Dict[str, float]:
    """Spread of lifetimes across independent random graphs."""
    values = np.array([lifetimes[seed] for seed in sorted(lifetimes)], dtype=np.float64)
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return {"mean": mean, "std": std, "relative_spread": std / mean if mean else math.nan, "graphs": float(values.size)}


class PhaseCell(BaseModel):
    """Outcome of one γ value of a phase diagram."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    gamma: float
    series: Optional[TimeSeries] = None
    spectrum: Optional[Spectrum] = None
    lifetime: Optional[Lifetime] = None
    lifetime_error: Optional[str] = None
    error: Optional[str] = None


class PhaseDiagram(BaseModel):
    """|⟨x⟩|(cycle, γ) grid with per-γ spectra and lifetimes."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    cells: List[PhaseCell] = Field(default_factory=list)

    @field_validator("cells")
    @classmethod
    def validate_distinct_gammas(cls, v):
        gammas = [cell.gamma for cell in v]
        if len(set(gammas)) != len(gammas):
            raise ValueError("gamma values must be distinct")
        return v

    @property
    def gammas(self) -> List[float]:
        return [cell.gamma for cell in self.cells]

    def heatmap_frame(self) -> pd.DataFrame:
        """Rows are cycles, columns are γ; failed cells are NaN columns."""
        columns = {}
        for cell in self.cells:
            key = repr(cell.gamma)
            if cell.series is None:
                columns[key] = pd.Series(dtype=np.float64)
            else:
                columns[key] = cell.series.cycle_frame()["x"].abs().reset_index(drop=True)
        frame = pd.DataFrame(columns)
        frame.index.name = "cycle"
        return frame

    def spectra_frame(self) -> pd.DataFrame:
        """Rows are frequency bins, columns are γ; entries are |A(ω)|."""
        columns = {}
        frequencies = None
        for cell in self.cells:
            if cell.spectrum is None:
                columns[repr(cell.gamma)] = pd.Series(dtype=np.float64)
                continue
            frequencies = cell.spectrum.frequencies if frequencies is None else frequencies
            columns[repr(cell.gamma)] = pd.Series(cell.spectrum.magnitude)
        frame = pd.DataFrame(columns)
        if frequencies is not None:
            frame.insert(0, "omega", pd.Series(frequencies))
        return frame


def analyze_series(
    series: TimeSeries, rectify: Rectify = "absolute", threshold: float = math.exp(-1.0)
) -> PhaseCell:
    """Spectrum and lifetime of a finished series."""
    cell = PhaseCell(gamma=series.protocol.gamma, series=series)
    if series.protocol.M >= 2:
        cell.spectrum = series_spectrum(series)
    try:
        cell.lifetime = heating_time(series, threshold=threshold, rectify=rectify)
    except ThresholdNotReachedError as e:
        cell.lifetime_error = str(e)
    return cell


def run_phase_cell(
    coupling_set: CouplingSet,
    protocol: DriveProtocol,
    hamiltonian_choice: HamiltonianChoice,
    initial: StateKind,
    rectify: Rectify,
    provenance: Optional[Dict[str, str]] = None,
    threshold: float = math.exp(-1.0),
) -> PhaseCell:
    """Single γ run; errors are captured on the cell."""
    with threadpool_limits(limits=1):
        try:
            series = run_protocol(coupling_set, protocol, hamiltonian_choice, initial, provenance)
        except PdtcError as e:
            logger.error(f"Cell at gamma={protocol.gamma:.6f} failed: {e}")
            return PhaseCell(gamma=protocol.gamma, error=str(e))

        return analyze_series(series, rectify, threshold)


def phase_diagram(
    coupling_set: CouplingSet,
    protocol: DriveProtocol,
    gammas: Sequence[float],
    hamiltonian_choice: HamiltonianChoice = "full",
    initial: Optional[StateKind] = None,
    rectify: Rectify = "absolute",
    workers: int = 1,
) -> PhaseDiagram:
    """One run per γ on a shared graph, assembled in the order of `gammas`."""
    if len(set(gammas)) != len(gammas):
        raise ValueError("gamma values must be distinct")
    initial = initial or StateKind()
    logger.info(f"Phase diagram over {len(gammas)} gamma values with {workers} worker(s)")
    cells = Parallel(n_jobs=workers)(
        delayed(run_phase_cell)(
            coupling_set,
            protocol.model_copy(update={"gamma": float(gamma)}),
            hamiltonian_choice,
            initial,
            rectify,
        )
        for gamma in gammas
    )
    return PhaseDiagram(cells=list(cells))
