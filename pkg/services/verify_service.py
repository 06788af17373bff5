"""
Invariant battery comparing closed forms and the Krylov engine with dense oracles.
"""

import logging
import math
from typing import Callable, List, Optional

import numpy as np

from config import settings
from schemas.domain import CouplingSet, DriveProtocol, RotationSpec, StateKind
from schemas.response_schemas import CheckResult, VerifyReport
from services.engine_service import (
    PauliKernel,
    apply_collective_rotation,
    evolve_step,
    iterate_protocol,
    measure_magnetization,
    prepare_state,
    protocol_steps,
)
from services.lattice_service import compute_couplings, generate_graph, sample_disorder
from services.operator_service import (
    SumFactors,
    build_system_hamiltonian,
    composite_rotation,
    lattice_sum_factors,
    leading_effective_hamiltonian,
    toggling_effective_hamiltonian,
)
from services.oracle_service import (
    cat_state_fidelity,
    dense_assemble,
    dense_rotation,
    dense_trajectory,
    floquet_spectrum_pairing,
    ideal_floquet_unitary,
    toggling_sum,
    total_spin,
)

logger = logging.getLogger(__name__)


def _su2_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Distance between 2x2 unitaries modulo a global phase."""
    overlap = np.trace(a.conj().T @ b)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(a * phase - b)))


class VerifyService:
    """Runs every invariant check and collects a report."""

    def __init__(self, seed: Optional[int] = None, sum_factors: SumFactors = lattice_sum_factors):
        self.seed = settings.VERIFY_SEED if seed is None else seed
        self.sum_factors = sum_factors

    def random_couplings(self, L: int, seed: int) -> CouplingSet:
        graph = generate_graph(L, 0.7, 0.8, seed)
        couplings = compute_couplings(graph)
        b = couplings.median_coupling
        return sample_disorder(couplings, b, 10.0 * b, seed + 1)

    def run(self) -> VerifyReport:
        checks: List[Callable[[], CheckResult]] = [
            self.check_hermiticity,
            self.check_x_conservation,
            self.check_parity_symmetry,
            self.check_matvec,
            self.check_lattice_sums,
            self.check_toggling,
            self.check_composite_rotation,
            self.check_krylov_trajectory,
            self.check_spectral_pairing,
            self.check_cat_states,
            self.check_period_doubling_trace,
        ]
        report = VerifyReport()
        for check in checks:
            try:
                result = check()
            except Exception as e:
                logger.error(f"Check {check.__name__} raised: {e}")
                result = CheckResult(name=check.__name__, passed=False, defect=math.inf, tolerance=0.0, detail=str(e))
            logger.info(f"{result.name}: {'pass' if result.passed else 'FAIL'} (defect {result.defect:.3e})")
            report.checks.append(result)
        return report

    @staticmethod
    def _result(name: str, defect: float, tolerance: float, detail: str = "") -> CheckResult:
        return CheckResult(name=name, passed=bool(defect < tolerance), defect=float(defect), tolerance=tolerance, detail=detail)

    def check_hermiticity(self) -> CheckResult:
        dense = dense_assemble(build_system_hamiltonian(self.random_couplings(5, self.seed))).matrix
        return self._result("hermiticity", float(np.max(np.abs(dense - dense.conj().T))), 1e-14, "system H, L=5")

    def check_x_conservation(self) -> CheckResult:
        couplings = self.random_couplings(6, self.seed + 10)
        h_bar = dense_assemble(leading_effective_hamiltonian(couplings)).matrix
        total_x = total_spin(couplings.L, "x").matrix
        commutator = h_bar @ total_x - total_x @ h_bar
        return self._result("commutator [H̄, 𝓘x]", float(np.linalg.norm(commutator, 2)), 1e-12, "L=6")

    def check_parity_symmetry(self) -> CheckResult:
        couplings = self.random_couplings(6, self.seed + 20)
        h_bar = dense_assemble(leading_effective_hamiltonian(couplings)).matrix
        parity = dense_rotation(couplings.L, RotationSpec.about("z", math.pi)).matrix
        commutator = h_bar @ parity - parity @ h_bar
        return self._result("commutator [H̄, P_z]", float(np.linalg.norm(commutator, 2)), 1e-12, "L=6")

    def check_matvec(self) -> CheckResult:
        couplings = self.random_couplings(5, self.seed + 30)
        operator = toggling_effective_hamiltonian(couplings, 7, 1.1)
        rng = np.random.default_rng(self.seed)
        psi = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        defect = np.max(np.abs(PauliKernel(operator).apply(psi) - dense_assemble(operator).matrix @ psi))
        return self._result("matrix-free matvec", float(defect), 1e-13, "L=5")

    def check_lattice_sums(self) -> CheckResult:
        rng = np.random.default_rng(self.seed + 40)
        worst = 0.0
        for _ in range(100):
            N = int(rng.integers(1, 60))
            theta = float(rng.uniform(0, 2 * math.pi))
            n = np.arange(1, N + 1)
            direct = (np.cos(2 * n * theta).mean(), np.sin(2 * n * theta).mean())
            closed = self.sum_factors(N, theta)
            worst = max(worst, abs(closed[0] - direct[0]), abs(closed[1] - direct[1]))
        return self._result("lattice sum factors", worst, 1e-12, "100 draws")

    def check_toggling(self) -> CheckResult:
        rng = np.random.default_rng(self.seed + 50)
        worst = 0.0
        for draw in range(20):
            couplings = self.random_couplings(4, self.seed + 100 + draw)
            N = int(rng.integers(1, 13))
            theta = float(rng.uniform(0.05, 2 * math.pi - 0.05))
            closed = toggling_effective_hamiltonian(couplings, N, theta, sum_factors=self.sum_factors)
            brute = toggling_sum(build_system_hamiltonian(couplings), N, theta)
            worst = max(worst, float(np.max(np.abs(dense_assemble(closed).matrix - brute.matrix))))
        return self._result("toggling closed form", worst, 1e-12, "20 draws, L=4")

    def check_composite_rotation(self) -> CheckResult:
        rng = np.random.default_rng(self.seed + 60)
        worst = 0.0
        for _ in range(50):
            N = int(rng.integers(1, 40))
            theta = float(rng.uniform(0, 2 * math.pi))
            gamma = float(rng.uniform(-math.pi, math.pi))
            axis = "z" if rng.random() < 0.5 else "y"
            composite = composite_rotation(N, theta, gamma, axis).su2()
            product = np.linalg.matrix_power(RotationSpec.about("x", theta).su2(), N) @ RotationSpec.about(axis, gamma).su2()
            worst = max(worst, _su2_distance(composite, product))

        limits = [
            (composite_rotation(8, math.pi / 2, 0.7, "z"), 0.7, (0.0, 0.0, 1.0)),
            (composite_rotation(9, math.pi / 2, 1e-9, "z"), math.pi / 2, (1.0, 0.0, 0.0)),
            (composite_rotation(9, math.pi / 2, math.pi, "z"), math.pi, (0.0, -1 / math.sqrt(2), 1 / math.sqrt(2))),
        ]
        for rotation, angle, axis in limits:
            worst = max(worst, abs(rotation.angle - angle), *(abs(a - b) for a, b in zip(rotation.axis, axis)))
        return self._result("composite rotation", worst, 1e-8, "50 draws + 3 limits")

    def check_krylov_trajectory(self) -> CheckResult:
        couplings = self.random_couplings(8, self.seed + 70)
        operator = build_system_hamiltonian(couplings)
        protocol = DriveProtocol(
            theta=math.pi / 2, gamma=0.9 * math.pi, tau=0.2 / couplings.median_coupling,
            N=10, M=5, noise_fraction=0.05, noise_seed=self.seed,
        )
        state = prepare_state(couplings.L, StateKind())
        dense = dense_assemble(operator)
        krylov = iterate_protocol(state, PauliKernel(operator), protocol)
        reference = dense_trajectory(
            dense, protocol_steps(protocol), state, protocol.theta, protocol.gamma, protocol.slow_axis
        )
        worst = 0.0
        for (_, a), (_, b) in zip(krylov, reference):
            worst = max(worst, float(np.linalg.norm(a.amplitudes - b.amplitudes)))
        return self._result("Krylov vs dense trajectory", worst, 1e-9, "L=8, τ·b̄=0.2, 105 steps")

    def check_spectral_pairing(self) -> CheckResult:
        worst = 0.0
        for L in (2, 4, 6):
            couplings = self.random_couplings(L, self.seed + 80 + L)
            h_bar = dense_assemble(leading_effective_hamiltonian(couplings))
            period = 3.0 / couplings.median_coupling
            unitary = ideal_floquet_unitary(h_bar, period)
            worst = max(worst, floquet_spectrum_pairing(unitary, period).max_defect)
        return self._result("quasi-energy π/T pairing", worst, 1e-8, "L=2,4,6")

    def check_cat_states(self) -> CheckResult:
        couplings = self.random_couplings(6, self.seed + 90)
        h_bar = dense_assemble(leading_effective_hamiltonian(couplings))
        unitary = ideal_floquet_unitary(h_bar, 5.0 / couplings.median_coupling)
        worst = max(abs(1.0 - cat_state_fidelity(unitary, sign)) for sign in ("+", "-"))
        return self._result("cat-state eigenstates", worst, 1e-10, "L=6")

    def check_period_doubling_trace(self) -> CheckResult:
        couplings = self.random_couplings(6, self.seed + 95)
        kernel = PauliKernel(leading_effective_hamiltonian(couplings))
        state = prepare_state(couplings.L, StateKind())
        tau = 0.05 / couplings.median_coupling
        worst = 0.0
        sign = 1.0
        for _ in range(20):
            state = apply_collective_rotation(state, RotationSpec.about("y", math.pi))
            for _ in range(4):
                state = evolve_step(state, kernel, tau)
            sign = -sign
            worst = max(worst, abs(measure_magnetization(state)[0] - sign))
        return self._result("idealized period doubling", worst, 1e-10, "L=6, 20 cycles")
