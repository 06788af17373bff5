import math

import numpy as np
import pandas as pd
import pytest

from config import settings
from services.sweep_service import SweepService
from store.artifact_store import ArtifactStore
from tests.helpers import read_key_values
from utils.file_utils import FileManager

pytestmark = pytest.mark.slow


def run_config(name: str, root):
    config = FileManager.load_run_config(settings.configs_dir / name)
    store = ArtifactStore(root)
    manifest = SweepService(store).execute(config)
    assert not manifest.failed_cells
    lifetimes = pd.read_csv(store.lifetimes_path)
    fits = read_key_values(store.fits_path)
    return config, store, lifetimes, fits


def nearest(frame: pd.DataFrame, gamma: float) -> pd.Series:
    return frame.loc[(frame["gamma"] - gamma).abs().idxmin()]


def test_reduced_phase_diagram_has_three_regions(tmp_path):
    _, _, lifetimes, fits = run_config("phase_diagram_reduced.yaml", tmp_path)
    assert (lifetimes["status"] == "ok").all()

    zero = nearest(lifetimes, 0.0)
    assert zero["zero_peak"] > zero["pi_peak"]
    for sign in (1, -1):
        edge = nearest(lifetimes, sign * 0.99 * math.pi)
        half = nearest(lifetimes, sign * 0.5 * math.pi)
        assert edge["pi_peak"] > edge["zero_peak"]
        assert edge["pi_peak"] > 5.0 * half["pi_peak"]

    near_half = lifetimes[(lifetimes["gamma"].abs() / math.pi - 0.5).abs() < 0.03]
    assert len(near_half) >= 2
    assert (near_half["lifetime_cycles"] < 50).all()
    assert float(fits["group.000.rigidity.half_width_over_pi"]) > 0.05


def test_heating_rate_exponent_matches_on_both_branches(tmp_path):
    _, _, _, fits = run_config("eps_scan.yaml", tmp_path)
    for group in ("000", "001"):
        fitted = {
            branch: tuple(float(fits[f"group.{group}.eps_fit.{branch}.{name}"]) for name in ("g", "lam"))
            for branch in ("zero", "pi")
        }
        for _, lam in fitted.values():
            assert 1.6 <= lam <= 2.8
        for a, b in zip(fitted["zero"], fitted["pi"]):
            assert abs(a - b) <= 0.4 * max(abs(a), abs(b))


def test_minimum_heating_time_follows_golden_rule_in_tau(tmp_path):
    _, _, _, fits = run_config("fast_drive.yaml", tmp_path)
    assert -2.6 <= float(fits["fast_drive.000.kicks.exponent"]) <= -1.6


def test_lifetime_per_cycle_scales_with_tau_and_grows_with_n(tmp_path):
    config, _, lifetimes, fits = run_config("frequency.yaml", tmp_path)
    exponents = [
        float(value) for key, value in fits.items() if key.startswith("fast_drive.") and key.endswith(".cycles.exponent")
    ]
    assert len(exponents) == 3
    assert all(-2.6 <= exponent <= -1.6 for exponent in exponents)

    # unresolved cells outlived the run
    lifetimes["lifetime_cycles"] = lifetimes["lifetime_cycles"].fillna(config.protocol.M)
    for _, scan in lifetimes.groupby("tau_j"):
        assert scan.sort_values("N")["lifetime_cycles"].is_monotonic_increasing


def test_lifetime_dips_when_fast_kicks_flip_by_pi(tmp_path):
    config, _, lifetimes, _ = run_config("flip_angle.yaml", tmp_path)
    by_theta = lifetimes.set_index("theta")["lifetime_cycles"]
    at_pi = by_theta[np.isclose(by_theta.index, math.pi)].iloc[0]
    at_half_pi = by_theta[np.isclose(by_theta.index, math.pi / 2)].iloc[0]
    if math.isnan(at_half_pi):
        at_half_pi = config.protocol.M
    assert not math.isnan(at_pi)
    assert at_half_pi >= 10.0 * at_pi


def test_large_initial_magnetization_keeps_period_doubling(tmp_path):
    _, store, lifetimes, _ = run_config("init_state.yaml", tmp_path)
    series = store.load_series()
    initial = {index: abs(s.frame["x"].iloc[0]) for index, s in series.items()}
    polarized = lifetimes[lifetimes["cell"].map(initial) > 0.5]
    assert len(polarized) >= 1
    lasting = polarized["lifetime_cycles"].isna() | (polarized["lifetime_cycles"] >= 50)
    assert lasting.all()
