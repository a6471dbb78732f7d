import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmcred.core import SbmParams, balanced_assignment, canonicalize, sample_graph
from sbmcred.credconf import (
    ALMOST,
    EXACT,
    HALF_LEVEL,
    LITERAL,
    BoundDivergenceError,
    binomial_sum_bounds,
    compound_exp_bounds,
    condition_value,
    confidence_floor,
    credible_set,
    critical_n,
    enlarge,
    enlargement_radius,
    plan_strategy,
    recovery_bound_almost,
    recovery_bound_exact,
    required_level,
)
from sbmcred.mcmc import EmpiricalPosterior
from sbmcred.posterior import assignment_index, enumerate_posterior

from test_posterior import small_table


# ---------------------------------------------------------------------------
# credible sets
# ---------------------------------------------------------------------------

def test_credible_set_greedy():
    table = small_table([0.2, 0.5, 0.3, 0.0])
    cred = credible_set(table, 0.7)
    assert list(cred.member_indices) == [1, 2]
    assert cred.achieved_mass == pytest.approx(0.8)
    assert cred.target_level == 0.7


def test_credible_set_level_zero_is_support():
    table = small_table([0.2, 0.5, 0.3, 0.0])
    cred = credible_set(table, 0.0)
    assert list(cred.member_indices) == [1, 2, 0]
    assert cred.achieved_mass == pytest.approx(1.0)


def test_credible_set_two_state():
    table = small_table([0.9, 0.1])
    assert len(credible_set(table, 0.95)) == 2
    assert len(credible_set(table, 0.9)) == 1


def test_credible_set_from_empirical():
    emp = EmpiricalPosterior(n=3, counts={0: 10, 2: 60, 3: 30}, total=100)
    cred = credible_set(emp, 0.85)
    assert list(cred.member_indices) == [2, 3]
    assert cred.achieved_mass == pytest.approx(0.9)


def test_credible_set_level_validation():
    with pytest.raises(ValueError):
        credible_set(small_table([1.0, 0.0]), 1.5)


@settings(max_examples=150)
@given(st.integers(2, 8), st.data())
def test_credible_set_minimality(n, data):
    raw = data.draw(st.lists(st.floats(0.0, 1.0), min_size=2 ** (n - 1),
                             max_size=2 ** (n - 1)))
    if sum(raw) == 0.0:
        raw = [1.0] * len(raw)
    masses = np.array(raw) / sum(raw)
    level = data.draw(st.floats(0.0, 1.0))
    cred = credible_set(small_table(masses), level)
    member_masses = masses[cred.member_indices]
    csum = np.cumsum(member_masses)
    assert csum[-1] >= min(level, masses.sum()) - 1e-12
    if level > 0.0 and len(cred) > 1:
        assert csum[-2] < min(level, float(np.cumsum(np.sort(masses)[::-1])[-1]))
    # sorted by decreasing mass
    assert all(member_masses[i] >= member_masses[i + 1]
               for i in range(len(member_masses) - 1))


# ---------------------------------------------------------------------------
# enlargement
# ---------------------------------------------------------------------------

def test_enlarge_radius_zero_identity():
    table = small_table([0.2, 0.5, 0.3, 0.0])
    cred = credible_set(table, 0.7)
    enlarged = enlarge(cred, 0)
    assert sorted(enlarged.member_indices) == sorted(cred.member_indices)


def test_enlarge_full_radius_is_everything():
    table = small_table([1.0] + [0.0] * 7)  # n = 4
    cred = credible_set(table, 0.5)
    assert len(enlarge(cred, 2)) == 8


def test_enlarge_single_center_radius_one():
    # all six single-flip neighbors of 000111 are distinct classes
    params = SbmParams(0.9, 0.1)
    g = sample_graph(params, balanced_assignment(6), 77)
    table = enumerate_posterior(g, params)
    center = canonicalize("000111")
    cred = credible_set(table, 0.0)
    cred.member_indices = np.array([assignment_index(center)])
    enlarged = enlarge(cred, 1)
    assert len(enlarged) == 7
    assert enlarged.contains(center)
    for v in range(6):
        labels = list(center.labels)
        labels[v] = 1 - labels[v]
        assert enlarged.contains(canonicalize(labels))


def test_enlarge_radius_validation():
    cred = credible_set(small_table([1.0, 0.0]), 0.5)
    with pytest.raises(ValueError):
        enlarge(cred, 2)


def test_enlarged_set_contains_map():
    params = SbmParams(0.85, 0.15)
    for seed in range(5):
        g = sample_graph(params, balanced_assignment(8), seed)
        table = enumerate_posterior(g, params)
        cred = credible_set(table, 0.6)
        map_index = int(np.argmax(table.masses))
        for radius in (0, 1, 2):
            assert enlarge(cred, radius).contains_index(map_index)


# ---------------------------------------------------------------------------
# recovery bounds
# ---------------------------------------------------------------------------

def test_recovery_bound_exact_values():
    assert recovery_bound_exact(25, 0.9, 0.1) == pytest.approx(0.9780159578, abs=1e-9)
    assert recovery_bound_exact(5, 0.9, 0.1) == 0.0
    assert recovery_bound_exact(5, 0.9, 0.1, clamp=False) == pytest.approx(-1.8108886, abs=1e-6)
    assert recovery_bound_exact(10, 0.5, 0.5) == 0.0  # rho = 1, vacuous
    with pytest.raises(ValueError):
        recovery_bound_exact(10, 1.0, 0.1)


def test_recovery_bound_almost_values():
    # f = (e/0.2) * 0.6 ** 7.5 and the geometric tail it induces
    f = (math.e / 0.2) * 0.6 ** 7.5
    expected = 1.0 - 0.5 * f ** 3 / (1.0 - f)
    assert recovery_bound_almost(15, 0.9, 0.1, 0.2) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.98185, abs=1e-4)
    with pytest.raises(BoundDivergenceError):
        recovery_bound_almost(10, 0.9, 0.1, 0.05)  # f about 4.23
    with pytest.raises(BoundDivergenceError):
        recovery_bound_almost(50, 0.5, 0.5, 0.3)  # p = q: f = e/a > 1
    with pytest.raises(ValueError):
        recovery_bound_almost(10, 0.9, 0.1, 0.6)


# ---------------------------------------------------------------------------
# required level and confidence floor
# ---------------------------------------------------------------------------

def test_required_level_exact_values():
    level = required_level(25, 0.9, 0.1, 0.05)
    assert level == pytest.approx(0.4397, abs=5e-4)
    # the variant without the exp-correction factor is about 0.422
    assert abs(level - 0.422) / 0.422 < 0.05
    assert required_level(10, 0.9, 0.1, 0.05) == 1.0
    assert required_level(10, 0.9, 0.1, 0.05, clamp=False) > 1.0
    with pytest.raises(ValueError):
        required_level(10, 0.9, 0.1, 0.0)


def test_required_level_almost_values():
    assert required_level(27, 0.9, 0.1, 0.05, ALMOST, 0.05) == pytest.approx(
        0.2109, abs=5e-4)
    # divergent geometric factor caps the level at one
    assert required_level(10, 0.9, 0.1, 0.05, ALMOST, 0.05) == 1.0
    with pytest.raises(ValueError):
        required_level(10, 0.9, 0.1, 0.05, ALMOST)  # missing a


def test_required_level_monotone_once_below_one():
    levels = [required_level(n, 0.9, 0.1, 0.05) for n in range(22, 80)]
    assert all(b < a for a, b in zip(levels, levels[1:]))


def test_confidence_floor_values():
    assert confidence_floor(25, 0.9, 0.1, 0.0) == recovery_bound_exact(25, 0.9, 0.1)
    assert confidence_floor(25, 0.9, 0.1, 0.578) == pytest.approx(0.9479, abs=5e-4)
    assert confidence_floor(25, 0.9, 0.1, 0.99999) == 0.0
    assert confidence_floor(15, 0.9, 0.1, 0.0, ALMOST, 0.2) == pytest.approx(
        recovery_bound_almost(15, 0.9, 0.1, 0.2))
    # divergent almost-mode factor gives a vacuous floor rather than an error
    assert confidence_floor(10, 0.9, 0.1, 0.1, ALMOST, 0.05) == 0.0
    with pytest.raises(ValueError):
        confidence_floor(25, 0.9, 0.1, 1.0)


# ---------------------------------------------------------------------------
# critical graph sizes
# ---------------------------------------------------------------------------

def test_critical_n_exact():
    assert critical_n(0.9, 0.1, 0.05) == 25
    assert critical_n(0.9, 0.1, 0.99) == 12
    assert critical_n(0.5, 0.5, 0.05) is None
    assert critical_n(0.9, 0.1, 0.05, n_cap=10) is None


def test_critical_n_almost_values():
    assert critical_n(0.9, 0.1, 0.05, ALMOST, 0.05, criterion=LITERAL) == 31
    assert critical_n(0.9, 0.1, 0.05, ALMOST, 0.05, criterion=HALF_LEVEL) == 26
    assert critical_n(0.9, 0.1, 0.05, ALMOST, 0.1, criterion=LITERAL) == 24
    assert critical_n(0.9, 0.1, 0.05, ALMOST, 0.25, criterion=HALF_LEVEL) == 14


@pytest.mark.parametrize("criterion", [LITERAL, HALF_LEVEL])
def test_critical_n_almost_decreasing_in_a(criterion):
    sizes = [critical_n(0.9, 0.1, 0.05, ALMOST, a, criterion=criterion)
             for a in (0.05, 0.1, 0.25)]
    assert all(isinstance(s, int) for s in sizes)
    assert sizes[0] > sizes[1] > sizes[2]


def test_critical_n_exact_criteria_coincide():
    for p in (0.6, 0.7, 0.8, 0.9, 0.95):
        for q in (0.05, 0.1, 0.2, 0.3, 0.4):
            for alpha in (0.01, 0.05, 0.2):
                assert critical_n(p, q, alpha, criterion=LITERAL) == \
                    critical_n(p, q, alpha, criterion=HALF_LEVEL)


# ---------------------------------------------------------------------------
# strategy planning
# ---------------------------------------------------------------------------

def test_enlargement_radius_float_safe():
    assert enlargement_radius(0.2, 15) == 3     # 0.2 * 15 is 3.0000000000000004
    assert enlargement_radius(0.25, 12) == 3
    assert enlargement_radius(0.05, 27) == 2
    assert enlargement_radius(0.3, 10) == 3


def test_plan_strategy_between_critical_sizes():
    report = plan_strategy(20, 0.9, 0.1, 0.05, [0.05, 0.1, 0.25])
    assert report.mode == ALMOST and report.a == 0.25
    assert report.required_level < 1e-4
    assert report.enlargement_radius == 5
    assert report.confidence_floor == pytest.approx(0.95)
    assert report.critical_n == 16


def test_plan_strategy_tiny_n_ties_to_exact():
    report = plan_strategy(5, 0.9, 0.1, 0.05, [0.05, 0.1, 0.25])
    assert report.mode == EXACT
    assert report.required_level == 1.0
    assert report.enlargement_radius == 0
    assert report.identifiable


def test_plan_strategy_p_equals_q_flagged():
    report = plan_strategy(10, 0.5, 0.5, 0.05, [0.1])
    assert not report.identifiable
    assert report.required_level == 1.0
    assert report.critical_n is None


def test_plan_strategy_needs_grid():
    with pytest.raises(ValueError):
        plan_strategy(10, 0.9, 0.1, 0.05, [])


# ---------------------------------------------------------------------------
# asymptotic condition values
# ---------------------------------------------------------------------------

def test_condition_value_examples():
    assert condition_value("detect_ratio", 3.0, 3.0, 100) == 0.0
    assert condition_value("detect_ratio", 9.0, 1.0, 100) == pytest.approx(3.2)
    assert condition_value("exact_known_sizes", 4.0, 0.0, 100) == pytest.approx(
        2 * math.log(100) + math.log(math.log(100)), abs=1e-12)
    assert condition_value("exact_known_sizes", 4.0, 0.0, 100) == pytest.approx(
        10.738, abs=1e-3)


def test_condition_value_all_kinds_evaluate():
    assert condition_value("detect_ratio_divergence", 5.0, 1.0, 50) == \
        condition_value("detect_ratio", 5.0, 1.0, 50)
    assert condition_value("almost_exact_exponent", 9.0, 1.0, 100, a=0.1) == \
        pytest.approx(0.1 * 100 * (math.log(0.1) + 1.0 - 1.0))
    assert condition_value("exact_unknown_sizes", 16.0, 1.0, 100) == pytest.approx(
        ((4 - 1) ** 2 - 16 * math.log(100) / 200 - 4) * math.log(100))
    assert condition_value("exact_unknown_sizes_simple", 16.0, 1.0, 100) == \
        pytest.approx(5 * math.log(100))
    assert condition_value("fixed_fraction_gap", 16.0, 1.0, 100, a=0.1, big_c=2.0) == \
        pytest.approx(9 - 8 * (1 - math.log(0.1)))
    assert condition_value("vanishing_fraction_gap", 16.0, 1.0, 100, a=0.1, big_c=2.0) == \
        pytest.approx(9 + 8 * math.log(0.1))


def test_condition_value_errors():
    with pytest.raises(ValueError):
        condition_value("nope", 1.0, 1.0, 10)
    with pytest.raises(ValueError):
        condition_value("almost_exact_exponent", 1.0, 1.0, 10)  # missing a
    with pytest.raises(ValueError):
        condition_value("fixed_fraction_gap", 1.0, 1.0, 10, a=0.1)  # missing C
    with pytest.raises(ValueError):
        condition_value("detect_ratio", -1.0, 1.0, 10)


def test_condition_value_divergence_trends():
    # expressions the theory sends to infinity increase over decade grids
    ns = (100, 1000, 10000)
    for kind, kwargs in [
        ("exact_known_sizes", dict(coeff1=9.0, coeff2=1.0)),
        ("exact_unknown_sizes", dict(coeff1=16.0, coeff2=1.0)),
        ("exact_unknown_sizes_simple", dict(coeff1=16.0, coeff2=1.0)),
        ("almost_exact_exponent", dict(coeff1=100.0, coeff2=1.0, a=0.1)),
    ]:
        a = kwargs.pop("a", None)
        values = [condition_value(kind, kwargs["coeff1"], kwargs["coeff2"], n, a=a)
                  for n in ns]
        assert values[0] < values[1] < values[2]


# ---------------------------------------------------------------------------
# tail inequality evaluators
# ---------------------------------------------------------------------------

def test_binomial_sum_bounds_examples():
    assert binomial_sum_bounds(2, 0.0) == (0.0, 0.0, 0.0)
    lhs, mid, outer = binomial_sum_bounds(4, 1.0)
    assert lhs == pytest.approx(10.0, abs=1e-9)
    assert mid == pytest.approx(30.0, abs=1e-9)
    assert outer == pytest.approx(8 * math.e ** 4, abs=1e-9)
    lhs, mid, outer = binomial_sum_bounds(6, 0.5)
    assert lhs == pytest.approx(0.285156, abs=1e-6)
    assert mid == pytest.approx(2.054573, abs=1e-6)
    assert outer == pytest.approx(3.175500, abs=1e-5)
    with pytest.raises(ValueError):
        binomial_sum_bounds(1, 0.5)
    with pytest.raises(ValueError):
        binomial_sum_bounds(5, 1.5)


def test_binomial_sum_bounds_chain_on_grid(capsys):
    factor_one_violations = 0
    for n in range(2, 61):
        for i in range(1, 20):
            x = i * 0.05
            lhs, mid, outer = binomial_sum_bounds(n, x)
            assert lhs <= mid * (1 + 1e-12) + 1e-12
            assert mid <= outer * (1 + 1e-12) + 1e-12
            # the sharper chain without the factor 2 (status reported below)
            if not (lhs <= mid / 2 * (1 + 1e-12) + 1e-12
                    and mid / 2 <= outer / 2 * (1 + 1e-12) + 1e-12):
                factor_one_violations += 1
    print(f"factor-1 chain violations on the grid: {factor_one_violations}")


def test_binomial_sum_bounds_large_n():
    lhs, mid, outer = binomial_sum_bounds(200, 0.9)
    assert all(math.isfinite(v) for v in (lhs, mid, outer))
    assert lhs <= mid <= outer


def test_compound_exp_bounds():
    for r in range(1, 51):
        x = -r + 0.1
        while x <= 10.0:
            compound, exponential = compound_exp_bounds(r, x)
            assert compound <= exponential * (1 + 1e-12)
            x += 0.5
    with pytest.raises(ValueError):
        compound_exp_bounds(0, 1.0)
    with pytest.raises(ValueError):
        compound_exp_bounds(3, -3.0)
