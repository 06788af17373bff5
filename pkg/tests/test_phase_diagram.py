import math

import pytest

from schemas.domain import DriveProtocol
from services.analysis_service import period_doubling_magnitude, phase_diagram
from tests.helpers import disordered


@pytest.mark.slow
def test_reduced_phase_diagram_separates_the_two_regimes():
    couplings = disordered(8, seed=3)
    protocol = DriveProtocol(
        theta=math.pi / 2,
        tau=0.05 / couplings.median_coupling,
        N=8,
        M=64,
        noise_fraction=0.02,
        noise_seed=4,
    )
    gammas = [0.0, 0.5 * math.pi, math.pi]
    diagram = phase_diagram(couplings, protocol, gammas, workers=2)
    zero, half, at_pi = diagram.cells
    assert all(cell.error is None for cell in diagram.cells)

    pi_peak = period_doubling_magnitude(at_pi.spectrum)
    assert pi_peak > 2.0 * period_doubling_magnitude(half.spectrum)
    assert zero.spectrum.magnitude_at(0.0) > period_doubling_magnitude(zero.spectrum)
    assert at_pi.spectrum.peak_frequency() == pytest.approx(math.pi / protocol.period)
