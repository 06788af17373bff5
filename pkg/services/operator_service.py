"""
Closed-form Hamiltonians and drive-geometry quantities.

All operators are built from spin-1/2 operators I = σ/2 with ħ = 1. Rotations
are active, U = e^{-iθ n·I}.
"""

import logging
import math
from typing import Callable, List, Tuple

import numpy as np

from config import settings
from schemas.domain import AXIS_VECTORS, CouplingSet, RotationSpec, Term, TermOperator
from utils.errors import ClosedFormUnavailableError, UnsupportedAngleError

logger = logging.getLogger(__name__)

SumFactors = Callable[[int, float], Tuple[float, float]]


def _pair(b: float, j: int, k: int, axis_a: str, axis_b: str) -> Term:
    return (b, ((j, axis_a), (k, axis_b)))


def _single(c: float, j: int, axis: str) -> Term:
    return (c, ((j, axis),))


def build_system_hamiltonian(coupling_set: CouplingSet) -> TermOperator:
    """H = Σ b_jk (2 IzIz - IxIx - IyIy) + Σ c_j Iz."""
    terms: List[Term] = []
    for j, k, b in coupling_set.pairs():
        terms += [_pair(2.0 * b, j, k, "z", "z"), _pair(-b, j, k, "x", "x"), _pair(-b, j, k, "y", "y")]
    for j, c in enumerate(coupling_set.fields):
        terms.append(_single(float(c), j, "z"))
    return TermOperator(L=coupling_set.L, terms=terms)


def leading_effective_hamiltonian(coupling_set: CouplingSet) -> TermOperator:
    """H̄ = Σ b_jk (3/2 (IzIz + IyIy) - I·I), no single-particle part."""
    terms: List[Term] = []
    for j, k, b in coupling_set.pairs():
        terms += [_pair(0.5 * b, j, k, "z", "z"), _pair(0.5 * b, j, k, "y", "y"), _pair(-b, j, k, "x", "x")]
    return TermOperator(L=coupling_set.L, terms=terms)


def lattice_sum_factors(N: int, theta: float) -> Tuple[float, float]:
    """G_c, G_s = (1/N) Σ_{n=1..N} (cos 2nϑ, sin 2nϑ)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    sin_theta = math.sin(theta)
    if abs(sin_theta) < settings.SINGULAR_SIN_TOL:
        n = np.arange(1, N + 1)
        return float(np.cos(2 * n * theta).sum() / N), float(np.sin(2 * n * theta).sum() / N)
    envelope = math.sin(N * theta) / sin_theta / N
    return envelope * math.cos((N + 1) * theta), envelope * math.sin((N + 1) * theta)


def toggling_effective_hamiltonian(
    coupling_set: CouplingSet,
    N: int,
    theta: float,
    sum_factors: SumFactors = lattice_sum_factors,
) -> TermOperator:
    """Leading toggling-frame average (1/N) Σ_n Uxⁿ H Ux⁻ⁿ in closed form.

    Dipolar part: b (3/2 [H_ff + G_c H_dq - G_s H̃_ff] - I·I) with G(N, ϑ).
    On-site part: c (G_c Iz - G_s Iy) with G(N, ϑ/2).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    gc, gs = sum_factors(N, theta)
    hc, hs = sum_factors(N, theta / 2.0)

    terms: List[Term] = []
    for j, k, b in coupling_set.pairs():
        # 3/2 (H_ff + gc H_dq) - I·I, expanded on zz, yy, xx
        terms += [
            _pair(b * (1.5 * (1.0 + gc) - 1.0), j, k, "z", "z"),
            _pair(b * (1.5 * (1.0 - gc) - 1.0), j, k, "y", "y"),
            _pair(-b, j, k, "x", "x"),
            _pair(-1.5 * b * gs, j, k, "z", "y"),
            _pair(-1.5 * b * gs, j, k, "y", "z"),
        ]
    for j, c in enumerate(coupling_set.fields):
        terms += [_single(float(c) * hc, j, "z"), _single(-float(c) * hs, j, "y")]
    return TermOperator(L=coupling_set.L, terms=terms)


def replica_floquet_hamiltonian(coupling_set: CouplingSet, tau: float, theta: float = math.pi / 2) -> TermOperator:
    """First-order Floquet Hamiltonian of Ux U_H at ϑ = π/2.

    (π/2 + τ) H_F = π/2 𝓘x + τ H̄ - τ (3π/4 Σ b H̃_ff + π/4 Σ c (Iy - Iz)).
    """
    if abs(theta - math.pi / 2) > 1e-12:
        raise UnsupportedAngleError()
    if tau <= 0:
        raise ValueError("tau must be positive")

    L = coupling_set.L
    terms: List[Term] = [_single(math.pi / 2, j, "x") for j in range(L)]
    scaled = tau * leading_effective_hamiltonian(coupling_set)
    terms += list(scaled.terms)
    for j, k, b in coupling_set.pairs():
        terms += [
            _pair(-tau * 0.75 * math.pi * b, j, k, "z", "y"),
            _pair(-tau * 0.75 * math.pi * b, j, k, "y", "z"),
        ]
    for j, c in enumerate(coupling_set.fields):
        terms += [
            _single(-tau * 0.25 * math.pi * float(c), j, "y"),
            _single(tau * 0.25 * math.pi * float(c), j, "z"),
        ]
    return (1.0 / (math.pi / 2 + tau)) * TermOperator(L=L, terms=terms)


def composite_rotation(N: int, theta: float, gamma: float, slow_axis: str = "z") -> RotationSpec:
    """Single rotation equal to Uxᴺ U_slow by exact SU(2) composition."""
    fast = RotationSpec.about("x", theta).su2()
    slow = RotationSpec.about(slow_axis, gamma).su2()
    total = np.linalg.matrix_power(fast, N) @ slow

    # total = a0 1 - i a·σ
    a0 = float(np.real(total[0, 0] + total[1, 1]) / 2)
    ax = float(np.real(1j * (total[0, 1] + total[1, 0]) / 2))
    ay = float(np.real((total[1, 0] - total[0, 1]) / 2))
    az = float(np.real(1j * (total[0, 0] - total[1, 1]) / 2))
    vector_norm = math.sqrt(ax * ax + ay * ay + az * az)
    if vector_norm < 1e-12:
        return RotationSpec(axis=AXIS_VECTORS["z"], angle=0.0)

    angle = 2.0 * math.atan2(vector_norm, a0) % (2.0 * math.pi)
    return RotationSpec(axis=(ax / vector_norm, ay / vector_norm, az / vector_norm), angle=angle)


def boundary_phase(M: int, l: int, N: int) -> float:
    """Residual x-rotation d_N(M, l) accumulated by M cycles at γ = lπ."""
    if l % 2 == 0:
        return 0.0
    sign_l = (-1) ** l
    numerator = math.pi * sign_l * ((-1) ** (l * M) - 1) * (N % 8)
    return numerator / (2 * (sign_l - 1))


def small_n_two_cycle_hamiltonian(
    coupling_set: CouplingSet,
    N: int = 9,
    theta: float = math.pi / 2,
    gamma: float = math.pi,
) -> TermOperator:
    """Two-cycle average H̄ + 1/(2N) Σ c (Iz - Iy) for N = 9, ϑ = π/2, γ = π."""
    if N != 9 or abs(theta - math.pi / 2) > 1e-12 or abs(gamma - math.pi) > 1e-12:
        raise ClosedFormUnavailableError()
    L = coupling_set.L
    correction = TermOperator(
        L=L,
        terms=[_single(float(c) / (2 * N), j, "z") for j, c in enumerate(coupling_set.fields)]
        + [_single(-float(c) / (2 * N), j, "y") for j, c in enumerate(coupling_set.fields)],
    )
    return leading_effective_hamiltonian(coupling_set) + correction
