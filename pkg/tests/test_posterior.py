import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmcred.core import (
    Graph,
    SbmParams,
    balanced_assignment,
    canonicalize,
    sample_graph,
)
from sbmcred.posterior import (
    Ball,
    CapacityError,
    Complement,
    DegeneratePosteriorError,
    PosteriorTable,
    Singleton,
    SizeClass,
    assignment_from_index,
    assignment_index,
    enumerate_posterior,
    query_mass,
    top_assignments,
)

from oracles import naive_posterior_masses


def small_table(masses):
    """Table with prescribed masses (n inferred from the length)."""
    masses = np.asarray(masses, dtype=float)
    n = int(np.log2(len(masses))) + 1
    assert len(masses) == 2 ** (n - 1)
    with np.errstate(divide="ignore"):
        log_mass = np.log(masses)
    return PosteriorTable(n=n, log_mass=log_mass, log_norm=0.0)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def test_two_state_bayes():
    g = Graph.from_edges(2, [(0, 1)])
    table = enumerate_posterior(g, SbmParams(0.9, 0.1))
    assert table.masses == pytest.approx([0.9, 0.1], abs=1e-12)
    assert top_assignments(table, count=1)[0][1] == pytest.approx(0.9)


def test_uniform_when_p_equals_q():
    g = sample_graph(SbmParams(0.5, 0.5), balanced_assignment(7), 0)
    table = enumerate_posterior(g, SbmParams(0.31, 0.31))
    assert table.masses == pytest.approx(np.full(64, 1 / 64), abs=1e-12)


@pytest.mark.parametrize("n", range(2, 9))
def test_matches_naive_oracle(n):
    params = SbmParams(0.85, 0.2)
    for seed in range(5):
        g = sample_graph(params, balanced_assignment(n), (n, seed))
        table = enumerate_posterior(g, params)
        ref = naive_posterior_masses(g, params.p, params.q)
        assert np.max(np.abs(table.masses - ref)) < 1e-10


def test_boundary_probabilities_match_oracle():
    for p, q in [(1.0, 0.3), (0.0, 0.6), (0.7, 0.0), (0.7, 1.0)]:
        g = sample_graph(SbmParams(p, q), balanced_assignment(6), 17)
        table = enumerate_posterior(g, SbmParams(p, q))
        ref = naive_posterior_masses(g, p, q)
        assert np.max(np.abs(table.masses - ref)) < 1e-12


def test_masses_sum_to_one():
    g = sample_graph(SbmParams(0.9, 0.1), balanced_assignment(12), 3)
    table = enumerate_posterior(g, SbmParams(0.9, 0.1))
    assert abs(table.masses.sum() - 1.0) < 1e-9


def test_graph_alone_determines_table():
    params = SbmParams(0.8, 0.25)
    truth = canonicalize("0010110")
    comp = canonicalize(truth.complement_labels())
    g1 = sample_graph(params, truth, 5)
    g2 = sample_graph(params, comp, 5)
    t1 = enumerate_posterior(g1, params)
    t2 = enumerate_posterior(g2, params)
    assert np.array_equal(t1.log_mass, t2.log_mass)


def test_block_partition_does_not_change_result():
    params = SbmParams(0.7, 0.2)
    g = sample_graph(params, balanced_assignment(11), 9)
    reference = enumerate_posterior(g, params, block_bits=0).log_mass
    for bits in (1, 4, 8, 16):
        assert np.array_equal(enumerate_posterior(g, params, block_bits=bits).log_mass,
                              reference)


def test_capacity_error():
    g = Graph(8, 0)
    with pytest.raises(CapacityError, match="mcmc"):
        enumerate_posterior(g, SbmParams(0.5, 0.2), n_max=6)


def test_degenerate_posterior_error():
    g = Graph.from_edges(4, [(0, 1)])
    with pytest.raises(DegeneratePosteriorError):
        enumerate_posterior(g, SbmParams(0.0, 0.0))


def test_single_vertex():
    table = enumerate_posterior(Graph(1, 0), SbmParams(0.4, 0.2))
    assert table.size == 1
    assert table.masses[0] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# index mapping
# ---------------------------------------------------------------------------

@settings(max_examples=100)
@given(st.integers(2, 12), st.data())
def test_index_round_trip(n, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    a = canonicalize(labels)
    idx = assignment_index(a)
    assert 0 <= idx < 2 ** (n - 1)
    assert assignment_from_index(n, idx) == a
    # index equals the label bits of the first-label-0 representative
    rep = labels if labels[0] == 0 else [1 - b for b in labels]
    assert idx == sum(b << (v - 1) for v, b in enumerate(rep) if v >= 1)


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

def test_query_mass_ball_basics():
    params = SbmParams(0.9, 0.1)
    g = sample_graph(params, balanced_assignment(8), 21)
    table = enumerate_posterior(g, params)
    center = balanced_assignment(8)
    assert query_mass(table, Ball(center, 4)) == pytest.approx(1.0, abs=1e-12)
    assert query_mass(table, Ball(center, 0)) == pytest.approx(
        query_mass(table, Singleton(center)), abs=1e-15)
    prev = -1.0
    for radius in range(5):
        mass = query_mass(table, Ball(center, radius))
        assert mass >= prev - 1e-15
        prev = mass
    with pytest.raises(ValueError):
        query_mass(table, Ball(center, 5))


def test_query_mass_complement_additivity():
    params = SbmParams(0.8, 0.3)
    g = sample_graph(params, balanced_assignment(7), 2)
    table = enumerate_posterior(g, params)
    ball = Ball(balanced_assignment(7), 2)
    assert query_mass(table, Complement(ball)) == pytest.approx(
        1.0 - query_mass(table, ball), abs=1e-12)


def test_query_mass_size_classes_partition():
    params = SbmParams(0.7, 0.4)
    g = sample_graph(params, balanced_assignment(9), 8)
    table = enumerate_posterior(g, params)
    total = sum(query_mass(table, SizeClass(m)) for m in range(5))
    assert total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        query_mass(table, SizeClass(5))


def test_ball_radius_one_has_n_plus_one_states():
    # single-flip neighbors of a balanced labeling are all distinct classes
    n = 6
    center_idx = assignment_index(balanced_assignment(n))
    from sbmcred.posterior import ball_mask

    assert int(ball_mask(n, center_idx, 1).sum()) == n + 1


# ---------------------------------------------------------------------------
# top assignments
# ---------------------------------------------------------------------------

def test_top_assignments_greedy_prefix():
    table = small_table([0.3, 0.5, 0.2, 0.0])
    picked = top_assignments(table, level=0.7)
    assert [m for _, m in picked] == pytest.approx([0.5, 0.3])
    full = top_assignments(table, level=1.0)
    assert [m for _, m in full] == pytest.approx([0.5, 0.3, 0.2])  # support only
    assert len(top_assignments(table, count=4)) == 4
    with pytest.raises(ValueError):
        top_assignments(table, level=1.5)
    with pytest.raises(ValueError):
        top_assignments(table, count=2, level=0.5)


def test_top_assignments_tie_break_by_index():
    table = small_table([0.25, 0.25, 0.25, 0.25])
    picked = top_assignments(table, count=4)
    indices = [assignment_index(a) for a, _ in picked]
    assert indices == [0, 1, 2, 3]


def test_top_assignments_map_first():
    g = sample_graph(SbmParams(0.9, 0.1), balanced_assignment(9), 30)
    table = enumerate_posterior(g, SbmParams(0.9, 0.1))
    top = top_assignments(table, count=3)
    masses = [m for _, m in top]
    assert masses == sorted(masses, reverse=True)
    assert masses[0] == pytest.approx(float(table.masses.max()))
