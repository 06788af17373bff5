"""
Brute-force dense references for the matrix-free engine and closed forms.
"""

import logging
import math
from typing import Iterable, Iterator, Tuple

import numpy as np

from config import settings
from schemas.domain import DenseOperator, RotationSpec, StateKind, StateVector, TermOperator
from schemas.response_schemas import PairingReport
from services.engine_service import DriveStep, prepare_state
from utils.errors import DenseSizeError, OddParityError

logger = logging.getLogger(__name__)

SPIN_MATRICES = {
    "x": np.array([[0, 0.5], [0.5, 0]], dtype=np.complex128),
    "y": np.array([[0, -0.5j], [0.5j, 0]], dtype=np.complex128),
    "z": np.array([[0.5, 0], [0, -0.5]], dtype=np.complex128),
}


def _check_size(L: int, cap: int) -> None:
    if L > cap:
        raise DenseSizeError(f"dense path limited to L <= {cap}, got L={L}")


def site_operator(L: int, factors: Iterable[Tuple[int, str]]) -> np.ndarray:
    """Kronecker product with site L-1 leftmost (site j is bit j of the index)."""
    single = {site: SPIN_MATRICES[axis] for site, axis in factors}
    matrix = np.ones((1, 1), dtype=np.complex128)
    for site in reversed(range(L)):
        matrix = np.kron(matrix, single.get(site, np.eye(2)))
    return matrix


def dense_assemble(operator: TermOperator) -> DenseOperator:
    _check_size(operator.L, settings.MAX_DENSE_SITES)
    dim = 2 ** operator.L
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    for coeff, factors in operator.terms:
        matrix += coeff * site_operator(operator.L, factors)
    return DenseOperator(L=operator.L, matrix=matrix)


def dense_propagator(hamiltonian: DenseOperator, duration: float) -> DenseOperator:
    """e^{-i duration H} through eigendecomposition."""
    if not hamiltonian.is_hermitian(atol=1e-12):
        raise ValueError("propagator needs a Hermitian operator")
    eigenvalues, vectors = np.linalg.eigh(hamiltonian.matrix)
    phases = np.exp(-1j * duration * eigenvalues)
    return DenseOperator(L=hamiltonian.L, matrix=(vectors * phases) @ vectors.conj().T)


def dense_rotation(L: int, rotation: RotationSpec) -> DenseOperator:
    _check_size(L, settings.MAX_DENSE_SITES)
    single = rotation.su2()
    matrix = np.ones((1, 1), dtype=np.complex128)
    for _ in range(L):
        matrix = np.kron(matrix, single)
    return DenseOperator(L=L, matrix=matrix)


def toggling_average(hamiltonian: DenseOperator, unitary: DenseOperator, count: int) -> DenseOperator:
    """(1/count) Σ_{m=1..count} U⁻ᵐ H Uᵐ."""
    total = np.zeros_like(hamiltonian.matrix)
    power = np.eye(hamiltonian.matrix.shape[0], dtype=np.complex128)
    for _ in range(count):
        power = unitary.matrix @ power
        total += power.conj().T @ hamiltonian.matrix @ power
    return DenseOperator(L=hamiltonian.L, matrix=total / count)


def toggling_sum(hamiltonian: TermOperator, N: int, theta: float) -> DenseOperator:
    """(1/N) Σ_{n=1..N} Uxⁿ H Ux⁻ⁿ with Ux = e^{-iϑ𝓘x}."""
    _check_size(hamiltonian.L, settings.MAX_TOGGLING_SITES)
    dense = dense_assemble(hamiltonian)
    # Ux⁻¹ toggles in the direction of Uxⁿ H Ux⁻ⁿ
    inverse = dense_rotation(hamiltonian.L, RotationSpec.about("x", -theta))
    return toggling_average(dense, inverse, N)


def toggling_frame_average(
    hamiltonian: DenseOperator,
    steps: Iterable[DriveStep],
    theta: float,
    gamma: float,
    slow_axis: str,
) -> DenseOperator:
    """Duration-weighted average of K† H K over the evolve events of a schedule.

    K is the product of all kicks preceding the evolve event.
    """
    fast = dense_rotation(hamiltonian.L, RotationSpec.about("x", theta)).matrix
    slow = dense_rotation(hamiltonian.L, RotationSpec.about(slow_axis, gamma)).matrix
    frame = np.eye(hamiltonian.matrix.shape[0], dtype=np.complex128)
    total = np.zeros_like(hamiltonian.matrix)
    elapsed = 0.0
    for step in steps:
        if step.kind == "evolve":
            total += step.duration * (frame.conj().T @ hamiltonian.matrix @ frame)
            elapsed += step.duration
        elif step.kind == "fast_kick":
            frame = fast @ frame
        else:
            frame = slow @ frame
    if elapsed == 0.0:
        raise ValueError("schedule contains no evolution")
    return DenseOperator(L=hamiltonian.L, matrix=total / elapsed)


def ideal_floquet_unitary(
    hamiltonian: DenseOperator, period: float, gamma: float = math.pi, slow_axis: str = "z"
) -> DenseOperator:
    """e^{-iT H̄} e^{-iγ 𝓘_axis}."""
    kick = dense_rotation(hamiltonian.L, RotationSpec.about(slow_axis, gamma))
    evolution = dense_propagator(hamiltonian, period)
    return DenseOperator(L=hamiltonian.L, matrix=evolution.matrix @ kick.matrix)


def _wrap(phase: np.ndarray) -> np.ndarray:
    return (phase + math.pi) % (2 * math.pi) - math.pi


def total_spin(L: int, axis: str) -> DenseOperator:
    """Σ_j I_j^axis."""
    _check_size(L, settings.MAX_DENSE_SITES)
    matrix = sum(site_operator(L, [(site, axis)]) for site in range(L))
    return DenseOperator(L=L, matrix=matrix)


def floquet_spectrum_pairing(unitary: DenseOperator, period: float) -> PairingReport:
    """Max distance of each eigenphase to its best π-shifted partner.

    Only the 𝓘x ≠ 0 subspace is examined: it is invariant under the ideal
    unitary, and its eigenstates come in P_z doublets. 𝓘x = 0 states have no
    symmetry-broken partner.
    """
    if unitary.L % 2 == 1:
        raise OddParityError()
    if unitary.unitarity_defect() > 1e-8:
        raise ValueError("pairing needs a unitary operator")
    values, vectors = np.linalg.eigh(total_spin(unitary.L, "x").matrix)
    sector = vectors[:, np.abs(values) > 0.5]
    restricted = sector.conj().T @ unitary.matrix @ sector
    phases = np.sort(np.angle(np.linalg.eigvals(restricted)))
    shifted = phases[:, None] + math.pi - phases[None, :]
    defects = np.abs(_wrap(shifted)).min(axis=1)
    report = PairingReport(
        L=unitary.L,
        period=period,
        eigenphases=[float(p) for p in phases],
        max_defect=float(defects.max()),
        sector_dim=int(sector.shape[1]),
    )
    logger.info(f"Spectral pairing at L={unitary.L}: max defect {report.max_defect:.3e}")
    return report


def cat_state_fidelity(unitary: DenseOperator, sign: str = "+") -> float:
    """|⟨C±|U|C±⟩|."""
    cat = prepare_state(unitary.L, StateKind(kind="cat", sign=sign)).amplitudes
    return float(abs(np.vdot(cat, unitary.matrix @ cat)))


def dense_trajectory(
    hamiltonian: DenseOperator,
    steps: Iterable[DriveStep],
    state: StateVector,
    theta: float,
    gamma: float,
    slow_axis: str,
) -> Iterator[Tuple[DriveStep, StateVector]]:
    """Dense counterpart of the engine's protocol iteration."""
    eigenvalues, vectors = np.linalg.eigh(hamiltonian.matrix)
    fast = dense_rotation(hamiltonian.L, RotationSpec.about("x", theta)).matrix
    slow = dense_rotation(hamiltonian.L, RotationSpec.about(slow_axis, gamma)).matrix
    psi = state.amplitudes.copy()
    for step in steps:
        if step.kind == "evolve":
            psi = vectors @ (np.exp(-1j * step.duration * eigenvalues) * (vectors.conj().T @ psi))
        elif step.kind == "fast_kick":
            psi = fast @ psi
        else:
            psi = slow @ psi
        yield step, StateVector(L=state.L, amplitudes=psi)
