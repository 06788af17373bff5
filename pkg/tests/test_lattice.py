import math

import numpy as np
import pytest

from schemas.domain import SpinGraph
from services.lattice_service import (
    compute_couplings,
    default_scale_window,
    estimate_coupling_scale,
    generate_graph,
    proposal_box_side,
    sample_disorder,
)
from tests.helpers import free_spins, two_spin_couplings
from utils.errors import GraphInfeasibleError, ScaleNotResolvedError


def pair_graph(displacement) -> SpinGraph:
    return SpinGraph(L=2, positions=[[0.0, 0.0, 0.0], displacement], r_min=0.7, r_max=0.8, seed=0)


def test_generate_graph_is_deterministic():
    a = generate_graph(8, 0.7, 0.8, seed=42)
    b = generate_graph(8, 0.7, 0.8, seed=42)
    c = generate_graph(8, 0.7, 0.8, seed=43)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_generate_graph_respects_distance_rules():
    graph = generate_graph(10, 0.7, 0.8, seed=1)
    assert np.array_equal(graph.positions[0], np.zeros(3))

    distances = graph.distances()
    off_diagonal = distances[~np.eye(graph.L, dtype=bool)]
    assert off_diagonal.min() >= 0.7
    for j in range(1, graph.L):
        assert distances[j, :j].min() < 0.8


def test_single_spin_graph():
    graph = generate_graph(1, 0.7, 0.8, seed=9)
    couplings = compute_couplings(graph)
    assert graph.positions.shape == (1, 3)
    assert couplings.median_coupling == 0.0


def test_generate_graph_gives_up_when_shell_is_empty():
    with pytest.raises(GraphInfeasibleError):
        generate_graph(3, 0.7, 0.7000000001, seed=0, proposal_budget=1000)


def test_generate_graph_rejects_bad_radii():
    with pytest.raises(ValueError):
        generate_graph(4, 0.8, 0.7, seed=0)


def test_proposal_box_grows_with_system_size():
    assert proposal_box_side(27, 0.8) > proposal_box_side(8, 0.8)


def test_dipolar_coupling_along_and_across_field():
    r = 0.75
    along = compute_couplings(pair_graph([0.0, 0.0, r]))
    across = compute_couplings(pair_graph([r, 0.0, 0.0]))
    assert along.couplings[0, 1] == pytest.approx(2.0 / (4.0 * math.pi * r ** 3), rel=1e-14)
    assert across.couplings[0, 1] == pytest.approx(-1.0 / (4.0 * math.pi * r ** 3), rel=1e-14)
    assert along.median_coupling == pytest.approx(abs(along.couplings[0, 1]))


def test_magic_angle_coupling_vanishes():
    direction = np.ones(3) / math.sqrt(3.0) * 0.75
    couplings = compute_couplings(pair_graph(list(direction)))
    assert abs(couplings.couplings[0, 1]) < 1e-12


def test_coupling_table_is_symmetric(couplings6):
    assert np.array_equal(couplings6.couplings, couplings6.couplings.T)
    assert np.all(np.diag(couplings6.couplings) == 0.0)


def test_sample_disorder_is_seeded():
    base = free_spins(5)
    a = sample_disorder(base, 1.0, 2.0, seed=4)
    b = sample_disorder(base, 1.0, 2.0, seed=4)
    assert np.array_equal(a.fields, b.fields)
    assert np.array_equal(sample_disorder(base, 0.3, 0.0, seed=4).fields, np.full(5, 0.3))


@pytest.mark.parametrize("scale", [0.5, 2.0, 3.7])
def test_couplings_scale_with_inverse_cube_of_distance(scale):
    graph = generate_graph(7, 0.7, 0.8, seed=12)
    stretched = SpinGraph(
        L=graph.L, positions=scale * graph.positions, r_min=scale * graph.r_min, r_max=scale * graph.r_max, seed=graph.seed
    )
    base, scaled = compute_couplings(graph), compute_couplings(stretched)
    np.testing.assert_allclose(scaled.couplings, base.couplings / scale ** 3, rtol=1e-12, atol=1e-12 * np.abs(base.couplings).max())
    assert scaled.median_coupling == pytest.approx(base.median_coupling / scale ** 3, rel=1e-12)


def test_coupling_sign_follows_angle_to_field():
    graph = generate_graph(12, 0.7, 0.8, seed=5)
    couplings = compute_couplings(graph).couplings
    for j in range(graph.L):
        for k in range(j + 1, graph.L):
            r = graph.positions[k] - graph.positions[j]
            cos_alpha = r[2] / np.linalg.norm(r)
            angular = 3.0 * cos_alpha ** 2 - 1.0
            if abs(angular) > 1e-9:
                assert np.sign(couplings[j, k]) == np.sign(angular)


def test_sample_disorder_statistics():
    L, mean, sigma = 2000, 0.3, 2.0
    fields = sample_disorder(free_spins(L), mean, sigma, seed=11).fields
    assert abs(fields.mean() - mean) < 5.0 * sigma / math.sqrt(L)
    assert fields.std(ddof=1) == pytest.approx(sigma, rel=0.1)


def test_coupling_scale_of_two_spins_matches_cosine_decay():
    # ⟨x⟩ = cos(3bt/2) under b(2IzIz - IxIx - IyIy)
    b = 1.0
    expected = 1.5 * b / math.acos(math.exp(-1.0))
    J = estimate_coupling_scale(two_spin_couplings(b), dt=0.001, t_max=5.0)
    assert J == pytest.approx(expected, rel=1e-4)


def test_coupling_scale_needs_two_spins():
    with pytest.raises(ScaleNotResolvedError):
        estimate_coupling_scale(free_spins(1), dt=0.01, t_max=1.0)


def test_coupling_scale_window_too_short():
    with pytest.raises(ScaleNotResolvedError):
        estimate_coupling_scale(two_spin_couplings(1.0), dt=0.01, t_max=0.1)


def test_default_scale_window_is_positive(couplings6):
    dt, t_max = default_scale_window(couplings6)
    assert 0 < dt < t_max
