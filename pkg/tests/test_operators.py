import math

import numpy as np
import pytest

from schemas.domain import DriveProtocol, RotationSpec, TermOperator
from services.engine_service import protocol_steps
from services.operator_service import (
    boundary_phase,
    build_system_hamiltonian,
    composite_rotation,
    lattice_sum_factors,
    leading_effective_hamiltonian,
    replica_floquet_hamiltonian,
    small_n_two_cycle_hamiltonian,
    toggling_effective_hamiltonian,
)
from services.oracle_service import (
    dense_assemble,
    dense_propagator,
    dense_rotation,
    toggling_frame_average,
    toggling_sum,
    total_spin,
)
from tests.helpers import disordered, two_spin_couplings
from utils.errors import ClosedFormUnavailableError, UnsupportedAngleError


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a @ b - b @ a, 2))


def test_system_hamiltonian_coefficients():
    h = build_system_hamiltonian(two_spin_couplings(0.3, fields=(1.5, -0.5)))
    assert h.coefficient((0, "z"), (1, "z")) == pytest.approx(0.6)
    assert h.coefficient((0, "x"), (1, "x")) == pytest.approx(-0.3)
    assert h.coefficient((0, "y"), (1, "y")) == pytest.approx(-0.3)
    assert h.coefficient((0, "z")) == 1.5
    assert h.coefficient((1, "z")) == -0.5


def test_system_hamiltonian_is_hermitian(couplings6):
    dense = dense_assemble(build_system_hamiltonian(couplings6))
    assert dense.is_hermitian(atol=0.0)


def test_leading_hamiltonian_conserves_total_x(couplings6):
    h_bar = dense_assemble(leading_effective_hamiltonian(couplings6)).matrix
    assert commutator_norm(h_bar, total_spin(6, "x").matrix) < 1e-12


def test_leading_hamiltonian_commutes_with_parity(couplings4):
    h_bar = dense_assemble(leading_effective_hamiltonian(couplings4)).matrix
    parity = dense_rotation(4, RotationSpec.about("z", math.pi)).matrix
    assert commutator_norm(h_bar, parity) < 1e-12


def test_leading_hamiltonian_has_no_fields(couplings4):
    assert all(len(factors) == 2 for _, factors in leading_effective_hamiltonian(couplings4).terms)


@pytest.mark.parametrize("N, theta", [(1, 0.4), (3, 2.0), (8, 1.3), (12, 5.9)])
def test_lattice_sum_factors_match_direct_sum(N, theta):
    n = np.arange(1, N + 1)
    gc, gs = lattice_sum_factors(N, theta)
    assert gc == pytest.approx(np.cos(2 * n * theta).mean(), abs=1e-13)
    assert gs == pytest.approx(np.sin(2 * n * theta).mean(), abs=1e-13)


def test_lattice_sum_factors_singular_angle():
    assert lattice_sum_factors(5, math.pi) == pytest.approx((1.0, 0.0), abs=1e-12)
    assert lattice_sum_factors(5, 0.0) == (1.0, 0.0)


@pytest.mark.parametrize("N, theta", [(1, 0.3), (4, math.pi / 2), (7, 1.1), (12, 2.9)])
def test_toggling_closed_form_matches_conjugation_sum(couplings4, N, theta):
    closed = dense_assemble(toggling_effective_hamiltonian(couplings4, N, theta)).matrix
    brute = toggling_sum(build_system_hamiltonian(couplings4), N, theta).matrix
    assert np.max(np.abs(closed - brute)) < 1e-12


def test_toggling_reduces_to_leading_form_at_eight_quarter_turns(couplings4):
    toggled = toggling_effective_hamiltonian(couplings4, 8, math.pi / 2)
    assert toggled.allclose(leading_effective_hamiltonian(couplings4), atol=1e-12)


def test_toggling_accepts_replacement_sum_factors(couplings4):
    def flipped_sign(N, theta):
        gc, gs = lattice_sum_factors(N, theta)
        return gc, -gs

    flipped = toggling_effective_hamiltonian(couplings4, 7, 1.1, sum_factors=flipped_sign)
    assert not flipped.allclose(toggling_effective_hamiltonian(couplings4, 7, 1.1))


def test_replica_hamiltonian_only_at_quarter_turn(couplings4):
    with pytest.raises(UnsupportedAngleError):
        replica_floquet_hamiltonian(couplings4, 0.01, theta=1.0)
    with pytest.raises(ValueError):
        replica_floquet_hamiltonian(couplings4, 0.0)


def test_replica_hamiltonian_is_hermitian_and_small_tau_limit(couplings4):
    tau = 1e-6
    h_f = replica_floquet_hamiltonian(couplings4, tau)
    assert dense_assemble(h_f).is_hermitian(atol=0.0)
    # τ → 0 leaves the pulse generator 𝓘x
    assert h_f.coefficient((0, "x")) == pytest.approx(1.0, rel=1e-5)


def replica_error(couplings, tau: float) -> float:
    exact = dense_rotation(couplings.L, RotationSpec.about("x", math.pi / 2)).matrix @ dense_propagator(
        dense_assemble(build_system_hamiltonian(couplings)), tau
    ).matrix
    approximate = dense_propagator(dense_assemble(replica_floquet_hamiltonian(couplings, tau)), math.pi / 2 + tau)
    return float(np.linalg.norm(approximate.matrix - exact, 2))


def test_replica_hamiltonian_error_is_second_order_in_tau():
    couplings = two_spin_couplings(0.3, fields=(0.5, -0.2))
    errors = [replica_error(couplings, tau) for tau in (0.04, 0.02, 0.01)]
    assert errors[0] < 5e-2
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.5 < coarse / fine < 4.5


def test_composite_rotation_limits():
    identity_fast = composite_rotation(8, math.pi / 2, 0.7, "z")
    assert identity_fast.angle == pytest.approx(0.7)
    assert identity_fast.axis == pytest.approx((0.0, 0.0, 1.0), abs=1e-12)

    pi_kick = composite_rotation(9, math.pi / 2, math.pi, "z")
    assert pi_kick.angle == pytest.approx(math.pi)
    assert pi_kick.axis == pytest.approx((0.0, -1 / math.sqrt(2), 1 / math.sqrt(2)), abs=1e-12)


def test_composite_rotation_equals_product_up_to_phase():
    composite = composite_rotation(5, 0.9, 2.1, "y").su2()
    product = np.linalg.matrix_power(RotationSpec.about("x", 0.9).su2(), 5) @ RotationSpec.about("y", 2.1).su2()
    overlap = np.trace(composite.conj().T @ product)
    assert abs(abs(overlap) - 2.0) < 1e-12


def test_composite_rotation_of_identity():
    assert composite_rotation(4, math.pi / 2, 0.0, "z").angle == 0.0


@pytest.mark.parametrize(
    "M, l, N, expected",
    [(1, 1, 301, -5 * math.pi / 2), (2, 1, 301, 0.0), (3, 2, 17, 0.0), (1, 1, 8, 0.0)],
)
def test_boundary_phase(M, l, N, expected):
    assert boundary_phase(M, l, N) == pytest.approx(expected)


def test_small_n_hamiltonian_without_fields_is_leading_form():
    couplings = two_spin_couplings(0.4)
    assert small_n_two_cycle_hamiltonian(couplings).allclose(leading_effective_hamiltonian(couplings))


def test_small_n_correction_breaks_x_conservation(couplings4):
    correction = small_n_two_cycle_hamiltonian(couplings4) - leading_effective_hamiltonian(couplings4)
    assert correction.coefficient((0, "z")) == pytest.approx(couplings4.fields[0] / 18)
    assert correction.coefficient((0, "y")) == pytest.approx(-couplings4.fields[0] / 18)
    assert commutator_norm(dense_assemble(correction).matrix, total_spin(4, "x").matrix) > 1e-3


def test_small_n_hamiltonian_only_for_worked_case(couplings4):
    with pytest.raises(ClosedFormUnavailableError):
        small_n_two_cycle_hamiltonian(couplings4, N=8)


def two_cycle_average(couplings, cycles: int = 2):
    protocol = DriveProtocol(theta=math.pi / 2, gamma=math.pi, tau=0.1, N=9, M=cycles, slow_axis="z", noise_seed=0)
    dense = dense_assemble(build_system_hamiltonian(couplings))
    return toggling_frame_average(dense, protocol_steps(protocol), protocol.theta, protocol.gamma, protocol.slow_axis)


def test_small_n_hamiltonian_matches_dense_two_cycle_average(couplings4):
    closed = dense_assemble(small_n_two_cycle_hamiltonian(couplings4)).matrix
    assert np.max(np.abs(two_cycle_average(couplings4).matrix - closed)) < 1e-12


def test_small_n_correction_needs_both_cycles(couplings4):
    closed = dense_assemble(small_n_two_cycle_hamiltonian(couplings4)).matrix
    assert np.max(np.abs(two_cycle_average(couplings4, cycles=1).matrix - closed)) > 1e-3


def test_term_operator_canonical_merge():
    op = TermOperator(L=3, terms=[(1.0, ((2, "x"), (0, "z"))), (0.5, ((0, "z"), (2, "x"))), (1.0, ((1, "y"),))])
    assert op.terms == ((1.0, ((1, "y"),)), (1.5, ((0, "z"), (2, "x"))))
    assert (op - op).terms == ()


def test_term_operator_rejects_repeated_site():
    with pytest.raises(ValueError):
        TermOperator(L=2, terms=[(1.0, ((0, "x"), (0, "z")))])


def test_term_operator_text_round_trip():
    op = leading_effective_hamiltonian(disordered(3, seed=2))
    assert TermOperator.from_text(op.to_text()) == op
