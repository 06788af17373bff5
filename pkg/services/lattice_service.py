"""
Random dipolar spin graphs, coupling tables, disorder and the interaction scale J.

Lengths are in units of ∛(μ₀ħγₙ²) and ħ = 1, so b_jk = (3cos²α - 1)/(4π|r|³).
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from config import settings
from schemas.domain import CouplingSet, SpinGraph, StateKind
from services.engine_service import PauliKernel, evolve_step, measure_magnetization, prepare_state
from services.operator_service import build_system_hamiltonian
from utils.errors import CouplingError, GraphInfeasibleError, ScaleNotResolvedError

logger = logging.getLogger(__name__)


def _ceil_cube_root(L: int) -> int:
    k = 1
    while k ** 3 < L:
        k += 1
    return k


def proposal_box_side(L: int, r_max: float) -> float:
    """Side of the proposal cube centred on the first spin."""
    return r_max * _ceil_cube_root(L) * settings.GRAPH_BOX_FACTOR


def generate_graph(
    L: int,
    r_min: float,
    r_max: float,
    seed: int,
    proposal_budget: Optional[int] = None,
) -> SpinGraph:
    """Place L spins one by one, keeping proposals that respect r_min and reach a partner within r_max."""
    if L < 1:
        raise ValueError("L must be at least 1")
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    budget = settings.GRAPH_PROPOSAL_BUDGET if proposal_budget is None else proposal_budget

    rng = np.random.default_rng(seed)
    half = proposal_box_side(L, r_max) / 2.0
    positions = np.zeros((L, 3))
    rejected = 0
    placed = 1
    while placed < L:
        candidate = rng.uniform(-half, half, size=3)
        distances = np.linalg.norm(positions[:placed] - candidate, axis=1)
        if distances.min() >= r_min and distances.min() < r_max:
            positions[placed] = candidate
            placed += 1
            continue
        rejected += 1
        if rejected > budget:
            logger.error(f"Graph generation gave up after {rejected} rejections (L={L}, seed={seed})")
            raise GraphInfeasibleError()

    logger.info(f"Generated graph L={L} seed={seed} with {rejected} rejected proposals")
    return SpinGraph(L=L, positions=positions, r_min=r_min, r_max=r_max, seed=seed)


def compute_couplings(graph: SpinGraph, field_axis: Sequence[float] = (0.0, 0.0, 1.0)) -> CouplingSet:
    """Dipolar table b_jk and median |b| over pairs closer than r_max; fields start at zero."""
    axis = np.asarray(field_axis, dtype=np.float64)
    axis_norm = np.linalg.norm(axis)
    if axis_norm == 0.0:
        raise ValueError("field axis must be nonzero")
    axis = axis / axis_norm

    L = graph.L
    couplings = np.zeros((L, L))
    connected = []
    for j in range(L):
        for k in range(j + 1, L):
            r = graph.positions[k] - graph.positions[j]
            distance = float(np.linalg.norm(r))
            if distance == 0.0:
                raise CouplingError(f"spins {j} and {k} coincide")
            cos_alpha = float(np.dot(r, axis)) / distance
            b = (3.0 * cos_alpha ** 2 - 1.0) / (4.0 * math.pi * distance ** 3)
            couplings[j, k] = couplings[k, j] = b
            if distance < graph.r_max:
                connected.append(abs(b))

    median = float(np.median(connected)) if connected else 0.0
    return CouplingSet(
        L=L,
        couplings=couplings,
        field_axis=tuple(float(c) for c in axis),
        median_coupling=median,
        fields=np.zeros(L),
    )


def sample_disorder(coupling_set: CouplingSet, mean: float, sigma: float, seed: int) -> CouplingSet:
    """On-site fields c_j drawn i.i.d. from N(mean, sigma²)."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    fields = mean + sigma * rng.standard_normal(coupling_set.L)
    return coupling_set.with_fields(fields)


def default_scale_window(coupling_set: CouplingSet) -> Tuple[float, float]:
    """(dt, t_max) resolving the fastest local frequency in the coupling set."""
    rate = max(
        coupling_set.median_coupling,
        float(np.sqrt(np.mean(coupling_set.fields ** 2))),
        float(np.abs(coupling_set.couplings).max()) / 10.0,
    )
    if rate == 0.0:
        rate = 1.0
    return 0.02 / rate, 400.0 / rate


def estimate_coupling_scale(coupling_set: CouplingSet, dt: float, t_max: float) -> float:
    """J = 1/τ_d from the first 1/e crossing of ⟨x⟩ under H_dd + H_z without drive."""
    if coupling_set.L < 2:
        raise ScaleNotResolvedError("coupling scale needs at least two spins")
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")

    kernel = PauliKernel(build_system_hamiltonian(coupling_set))
    state = prepare_state(coupling_set.L, StateKind())
    threshold = math.exp(-1.0)
    previous_t, previous_x = 0.0, measure_magnetization(state)[0]
    steps = int(math.floor(t_max / dt + 1e-9))
    for step in range(1, steps + 1):
        state = evolve_step(state, kernel, dt)
        t, x = step * dt, measure_magnetization(state)[0]
        if x < threshold:
            fraction = (previous_x - threshold) / (previous_x - x)
            tau_d = previous_t + fraction * (t - previous_t)
            logger.info(f"Coupling scale resolved: tau_d={tau_d:.6g}, J={1.0 / tau_d:.6g}")
            return 1.0 / tau_d
        previous_t, previous_x = t, x
    raise ScaleNotResolvedError()
