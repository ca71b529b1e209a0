import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efficient_ppe import (
    alpha,
    beta,
    check_conditions,
    check_prop1,
    corners,
    deviation_stats,
    efficient_frontier,
    make_contest,
    make_modified_pd,
    min_discount,
    mu_min,
    regularity,
)
from efficient_ppe.errors import InfeasibleMu, LabelingViolation, SingletonSet


def brute_alpha(game, fr, i, j):
    """Enumerate the deviations of a finite game directly."""
    base_u = fr.v_tilde[i, j]
    base_b = game.rho_bad(i, fr.a_tilde[i])[0]
    best = -np.inf
    for a in game.actions[j].grid():
        prof = fr.a_tilde[i].copy()
        prof[j] = a
        gain = game.U(prof[None])[0, j] - base_u
        d = game.rho_bad(i, prof[None])[0] - base_b
        if gain > 0:
            best = max(best, gain / d)
    return best


def test_pd_alpha_matches_enumeration(pd_game, pd_frontier, pd_stats):
    for i, j in [(0, 1), (1, 0)]:
        assert pd_stats.alpha[i, j] == pytest.approx(5 / 3, abs=1e-12)
        assert pd_stats.alpha[i, j] == pytest.approx(brute_alpha(pd_game, pd_frontier, i, j),
                                                     abs=1e-12)
        assert pd_game.actions[j].describe(pd_stats.alpha_witness[(i, j)]) == "D"
    assert np.all(np.isinf(pd_stats.beta[[0, 1], [1, 0]]))


def test_pd_floor_and_discount(pd_frontier, pd_stats):
    mu = mu_min(pd_frontier, pd_stats)
    assert np.allclose(mu, 4 / 3, atol=1e-12)
    assert min_discount(pd_frontier, pd_stats, mu) == pytest.approx(7 / 9, abs=1e-12)


def test_table3_alpha(table3_game):
    fr = efficient_frontier(table3_game)
    stats = deviation_stats(table3_game, fr)
    expected = np.array([[np.nan, 0.3, 0.6], [0.6, np.nan, 0.3], [0.3, 0.6, np.nan]])
    off = ~np.eye(3, dtype=bool)
    assert np.allclose(stats.alpha[off], expected[off], atol=1e-12)
    assert np.allclose(mu_min(fr, stats), 0.7)
    with pytest.raises(InfeasibleMu):
        check_conditions(table3_game, fr, stats)


def test_contest_alpha_is_cost_ratio(contest_game):
    fr = efficient_frontier(contest_game, 401)
    value, witness = alpha(contest_game, fr, 0, 1, 401)
    assert value == pytest.approx(1 / 6, abs=1e-9)
    b, _ = beta(contest_game, fr, 0, 1, 401)
    assert np.isinf(b)


def test_contest_without_profitable_deviation_is_prop1():
    g = make_contest(kappa=0.7, m=101)
    fr = efficient_frontier(g, 101)
    assert check_prop1(g, fr, 0, 101)
    value, _ = alpha(g, fr, 0, 1, 101)
    assert value == -np.inf


def test_labeling_violation_detected():
    g = make_modified_pd(q=0.5, r=0.5, enforce_constraints=False)
    fr = efficient_frontier(g)
    with pytest.raises(LabelingViolation) as info:
        alpha(g, fr, 0, 1)
    assert info.value.j == 1


def test_corners_and_regularity(pd_frontier, table3_game):
    vhat = corners(pd_frontier, [4 / 3, 4 / 3])
    assert np.allclose(vhat, [[8 / 3, 4 / 3], [4 / 3, 8 / 3]])
    assert regularity(pd_frontier, [4 / 3, 4 / 3])[0]
    fr3 = efficient_frontier(table3_game)
    regular, _, theta = regularity(fr3, [0.2, 0.2, 0.2])
    assert not regular
    assert theta.min() < 0
    assert regularity(fr3, [0.5, 0.5, 0.5])[0]


def test_singleton_set_has_no_discount(pd_frontier, pd_stats):
    with pytest.raises(SingletonSet):
        min_discount(pd_frontier, pd_stats, [2.0, 2.0])
    with pytest.raises(InfeasibleMu):
        min_discount(pd_frontier, pd_stats, [2.5, 2.0])


def test_pd_condition_report(pd_game, pd_frontier, pd_stats):
    rep = check_conditions(pd_game, pd_frontier, pd_stats, delta=0.8)
    assert rep.passed
    assert rep.cond3.margin == pytest.approx(0.0, abs=1e-12)
    assert rep.delta_min == pytest.approx(7 / 9)
    rep = check_conditions(pd_game, pd_frontier, pd_stats, delta=0.7)
    assert rep.cond4.passed is False
    assert not rep.passed
    rep = check_conditions(pd_game, pd_frontier, pd_stats, mu=[1.0, 1.5])
    assert rep.cond3.passed is False


def test_analysis_round_trip(pd_game, pd_frontier, pd_stats):
    first = check_conditions(pd_game, pd_frontier, pd_stats, delta=0.85)
    again = check_conditions(pd_game, pd_frontier, pd_stats, mu=first.mu, delta=first.delta)
    for name, c in first.conditions.items():
        assert again.conditions[name].margin == c.margin


def test_mm1_fails_condition2():
    from efficient_ppe import make_mm1

    g = make_mm1(m=201)
    fr = efficient_frontier(g, 201)
    stats = deviation_stats(g, fr, 201)
    assert np.allclose(stats.alpha[~np.eye(3, dtype=bool)], 0.180625, atol=1e-9)
    rep = check_conditions(g, fr, stats, m=201)
    assert rep.cond2.passed is False


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_discount_decreases_with_slack(s1, s2):
    # a larger floor leaves less room and needs more patience
    g = make_modified_pd()
    fr = efficient_frontier(g)
    stats = deviation_stats(g, fr)
    lo = mu_min(fr, stats)
    small, large = sorted([s1, s2])
    d_low = min_discount(fr, stats, lo + small * (2 - lo))
    d_high = min_discount(fr, stats, lo + large * (2 - lo))
    assert d_high >= d_low - 1e-15
