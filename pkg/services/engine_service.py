"""
State-vector engine: matrix-free Pauli action, collective rotations, Krylov
propagation and the two-frequency drive protocol.
"""

import logging
import math
from typing import Dict, Iterator, List, Literal, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import eigh_tridiagonal

from config import settings
from schemas.domain import (
    SERIES_COLUMNS,
    CouplingSet,
    DriveProtocol,
    RotationSpec,
    StateKind,
    StateVector,
    TermOperator,
    TimeSeries,
)
from services.operator_service import build_system_hamiltonian, leading_effective_hamiltonian
from utils.errors import KrylovConvergenceError, NormDriftError

logger = logging.getLogger(__name__)

HamiltonianChoice = Literal["full", "idealized"]

_SINGLE_SITE_STATES: Dict[str, Tuple[complex, complex]] = {
    "+x": (1 / math.sqrt(2), 1 / math.sqrt(2)),
    "-x": (1 / math.sqrt(2), -1 / math.sqrt(2)),
    "+y": (1 / math.sqrt(2), 1j / math.sqrt(2)),
    "-y": (1 / math.sqrt(2), -1j / math.sqrt(2)),
    "+z": (1.0, 0.0),
    "-z": (0.0, 1.0),
}


class PauliKernel:
    """Compiled matrix-free form of a TermOperator.

    Every Pauli product P acts as (Pψ)[s] = (-i)^{n_y} (-1)^{|s & zmask|} ψ[s ^ xmask].
    Terms sharing an xmask are folded into one coefficient vector, so H·ψ costs
    one gather per distinct flip pattern.
    """

    def __init__(self, operator: TermOperator):
        self.L = operator.L
        self.dim = 2 ** self.L
        index = np.arange(self.dim, dtype=np.int64)
        bits = [((index >> site) & 1).astype(np.int8) for site in range(self.L)]

        diagonal = np.zeros(self.dim, dtype=np.complex128)
        flips: Dict[int, np.ndarray] = {}
        for coeff, factors in operator.terms:
            xmask, parity, n_y = 0, np.zeros(self.dim, dtype=np.int8), 0
            for site, axis in factors:
                if axis in ("x", "y"):
                    xmask |= 1 << site
                if axis in ("y", "z"):
                    parity ^= bits[site]
                if axis == "y":
                    n_y += 1
            scale = coeff * 0.5 ** len(factors) * (-1j) ** n_y
            vector = scale * (1 - 2 * parity.astype(np.float64))
            if xmask == 0:
                diagonal += vector
            elif xmask in flips:
                flips[xmask] += vector
            else:
                flips[xmask] = vector.astype(np.complex128)

        self.diagonal = diagonal
        self.flips: List[Tuple[Tuple[int, ...], np.ndarray]] = [
            (tuple(self.L - 1 - site for site in range(self.L) if mask >> site & 1), flips[mask])
            for mask in sorted(flips)
        ]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.diagonal * psi
        shaped = psi.reshape((2,) * self.L)
        for tensor_axes, vector in self.flips:
            out += vector * np.flip(shaped, axis=tensor_axes).reshape(-1)
        return out


OperatorLike = Union[TermOperator, PauliKernel]


def as_kernel(operator: OperatorLike) -> PauliKernel:
    return operator if isinstance(operator, PauliKernel) else PauliKernel(operator)


def _product_state(L: int, single: Tuple[complex, complex]) -> np.ndarray:
    amplitudes = np.ones(1, dtype=np.complex128)
    site = np.array(single, dtype=np.complex128)
    for _ in range(L):
        amplitudes = np.kron(site, amplitudes)
    return amplitudes


def prepare_state(L: int, kind: StateKind, hamiltonian: Optional[OperatorLike] = None) -> StateVector:
    """Initial state: polarized product, Hamiltonian-evolved x-state or cat state."""
    if kind.kind == "polarized":
        return StateVector(L=L, amplitudes=_product_state(L, _SINGLE_SITE_STATES[kind.axis]))

    if kind.kind == "cat":
        if L < 2:
            raise ValueError("cat states need at least two spins")
        plus = _product_state(L, _SINGLE_SITE_STATES["+x"])
        minus = _product_state(L, _SINGLE_SITE_STATES["-x"])
        sign = 1.0 if kind.sign == "+" else -1.0
        return StateVector(L=L, amplitudes=(plus + sign * minus) / math.sqrt(2))

    if hamiltonian is None:
        raise ValueError("evolved states need the system Hamiltonian")
    start = StateVector(L=L, amplitudes=_product_state(L, _SINGLE_SITE_STATES["+x"]))
    return evolve(start, hamiltonian, kind.t_d)


def apply_collective_rotation(state: StateVector, rotation: RotationSpec) -> StateVector:
    """Apply ⊗_j e^{-i angle n·σ_j/2} as L local 2x2 gates."""
    if rotation.angle == 0.0:
        return state.copy()
    gate = rotation.su2()
    psi = state.amplitudes
    for site in range(state.L):
        block = psi.reshape(-1, 2, 2 ** site)
        psi = np.einsum("ab,ibk->iak", gate, block).reshape(-1)
    return StateVector(L=state.L, amplitudes=psi)


def measure_magnetization(state: StateVector) -> Tuple[float, float, float]:
    """(⟨x⟩, ⟨y⟩, ⟨z⟩) with ⟨x⟩ = (2/L)⟨𝓘x⟩."""
    sx = sy = sz = 0.0
    for site in range(state.L):
        block = state.amplitudes.reshape(-1, 2, 2 ** site)
        up, down = block[:, 0, :], block[:, 1, :]
        rho_ud = np.vdot(down, up)
        sx += 2.0 * rho_ud.real
        sy -= 2.0 * rho_ud.imag
        sz += float(np.vdot(up, up).real - np.vdot(down, down).real)
    return sx / state.L, sy / state.L, sz / state.L


def state_fidelity(a: StateVector, b: StateVector) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def _tridiagonal_exp_e1(alpha: List[float], beta: List[float], duration: float) -> np.ndarray:
    if len(alpha) == 1:
        return np.array([np.exp(-1j * duration * alpha[0])])
    eigenvalues, vectors = eigh_tridiagonal(np.array(alpha), np.array(beta))
    return vectors @ (np.exp(-1j * duration * eigenvalues) * vectors[0, :])


def evolve_step(
    state: StateVector,
    operator: OperatorLike,
    duration: float,
    tol: Optional[float] = None,
    max_dim: Optional[int] = None,
) -> StateVector:
    """e^{-i duration H} ψ by adaptive Lanczos with full reorthogonalization."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if duration == 0:
        return state.copy()
    tol = settings.KRYLOV_TOL if tol is None else tol
    max_dim = settings.KRYLOV_MAX_DIM if max_dim is None else max_dim
    kernel = as_kernel(operator)

    psi = state.amplitudes
    beta0 = float(np.linalg.norm(psi))
    basis = [psi / beta0]
    alpha: List[float] = []
    beta: List[float] = []

    for j in range(max_dim):
        w = kernel.apply(basis[j])
        alpha.append(float(np.vdot(basis[j], w).real))
        w -= alpha[j] * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        for v in basis:
            w -= np.vdot(v, w) * v
        residual = float(np.linalg.norm(w))

        coefficients = _tridiagonal_exp_e1(alpha, beta, duration)
        error = beta0 * residual * abs(coefficients[-1])
        if residual <= 1e-14 * max(1.0, abs(alpha[j])) or error < tol:
            result = np.zeros_like(psi)
            for c, v in zip(coefficients, basis):
                result += c * v
            result *= beta0
            drift = abs(float(np.linalg.norm(result)) - beta0)
            if drift >= settings.NORM_DRIFT_TOL:
                raise NormDriftError(f"norm drift {drift:.3e} after Krylov step")
            result *= beta0 / np.linalg.norm(result)
            return StateVector(L=state.L, amplitudes=result)

        beta.append(residual)
        basis.append(w / residual)

    raise KrylovConvergenceError()


def evolve(
    state: StateVector,
    operator: OperatorLike,
    duration: float,
    max_step: Optional[float] = None,
) -> StateVector:
    """Long-duration propagation by equal Krylov substeps."""
    kernel = as_kernel(operator)
    if duration == 0:
        return state.copy()
    if max_step is None:
        scale = sum(abs(v).max() for _, v in kernel.flips) + abs(kernel.diagonal).max()
        max_step = 8.0 / scale if scale > 0 else duration
    steps = max(1, math.ceil(duration / max_step))
    for _ in range(steps):
        state = evolve_step(state, kernel, duration / steps)
    return state


class DriveStep(NamedTuple):
    """One event of the protocol schedule."""

    kind: Literal["slow_kick", "fast_kick", "evolve"]
    cycle: int
    duration: float = 0.0


def protocol_steps(protocol: DriveProtocol, hamiltonian_choice: HamiltonianChoice = "full") -> Iterator[DriveStep]:
    """Deterministic event schedule including drawn timing noise."""
    rng = np.random.default_rng(protocol.noise_seed)
    spread = protocol.noise_fraction * protocol.tau

    def draw() -> float:
        if spread == 0.0:
            return protocol.tau
        return protocol.tau + float(rng.uniform(-spread, spread))

    for cycle in range(1, protocol.M + 1):
        yield DriveStep("slow_kick", cycle)
        if hamiltonian_choice == "full":
            for _ in range(protocol.N):
                yield DriveStep("evolve", cycle, draw())
                yield DriveStep("fast_kick", cycle)
        else:
            duration = draw()
            for _ in range(protocol.N):
                yield DriveStep("evolve", cycle, duration)


def protocol_hamiltonian(coupling_set: CouplingSet, hamiltonian_choice: HamiltonianChoice) -> TermOperator:
    if hamiltonian_choice == "full":
        return build_system_hamiltonian(coupling_set)
    if hamiltonian_choice == "idealized":
        return leading_effective_hamiltonian(coupling_set)
    raise ValueError(f"unknown hamiltonian choice '{hamiltonian_choice}'")


def iterate_protocol(
    state: StateVector,
    operator: OperatorLike,
    protocol: DriveProtocol,
    hamiltonian_choice: HamiltonianChoice = "full",
) -> Iterator[Tuple[DriveStep, StateVector]]:
    """Yield (step, state after step) for every protocol event."""
    kernel = as_kernel(operator)
    fast = RotationSpec.about("x", protocol.theta)
    slow = RotationSpec.about(protocol.slow_axis, protocol.gamma)
    for step in protocol_steps(protocol, hamiltonian_choice):
        if step.kind == "evolve":
            state = evolve_step(state, kernel, step.duration)
        elif step.kind == "fast_kick":
            state = apply_collective_rotation(state, fast)
        else:
            state = apply_collective_rotation(state, slow)
        yield step, state


def run_protocol(
    coupling_set: CouplingSet,
    protocol: DriveProtocol,
    hamiltonian_choice: HamiltonianChoice = "full",
    initial: Optional[StateKind] = None,
    provenance: Optional[Dict[str, str]] = None,
) -> TimeSeries:
    """Execute M Floquet cycles and record magnetization per the schedule."""
    initial = initial or StateKind()
    hamiltonian = protocol_hamiltonian(coupling_set, hamiltonian_choice)
    kernel = PauliKernel(hamiltonian)
    start_kernel = kernel if hamiltonian_choice == "full" else PauliKernel(build_system_hamiltonian(coupling_set))
    state = prepare_state(coupling_set.L, initial, start_kernel)

    logger.info(
        f"Running protocol L={coupling_set.L} N={protocol.N} M={protocol.M} "
        f"gamma={protocol.gamma:.6f} theta={protocol.theta:.6f} mode={hamiltonian_choice}"
    )
    per_kick = protocol.measure_every == "fast_kick"
    kicks_in_cycle = protocol.N if hamiltonian_choice == "full" else 0

    x, y, z = measure_magnetization(state)
    rows = [(0, 0, 0.0, x, y, z, state.norm(), x)]
    kick, time = 0, 0.0
    samples: List[float] = []

    for step, state in iterate_protocol(state, kernel, protocol, hamiltonian_choice):
        if step.kind == "slow_kick":
            samples = []
            kick += 1
        elif step.kind == "fast_kick":
            kick += 1
        else:
            time += step.duration
            if kicks_in_cycle:
                continue
            kick += 1

        at_cycle_end = step.kind != "slow_kick" and kick % protocol.kicks_per_cycle == 0
        if step.kind != "slow_kick" or per_kick:
            x, y, z = measure_magnetization(state)
            if step.kind != "slow_kick":
                samples.append(x)
            if per_kick or at_cycle_end:
                running = float(np.mean(samples)) if samples else x
                rows.append((kick, step.cycle, time, x, y, z, state.norm(), running))

    frame = pd.DataFrame(rows, columns=SERIES_COLUMNS)
    logger.info(f"Protocol finished after {kick} kicks, final <x>={frame['x'].iloc[-1]:.6f}")
    return TimeSeries(frame=frame, protocol=protocol, provenance=provenance or {})
