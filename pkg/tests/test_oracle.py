import numpy as np
import pytest

from efficient_ppe import (
    DecompositionOracle,
    EquilibriumConfig,
    decomposable,
    deviation_stats,
    efficient_frontier,
    efficient_ppe_interval,
    is_self_generating,
    make_contest,
    make_table3,
    run,
    two_player,
)
from efficient_ppe.oracle import covering_grid

MU = np.array([4 / 3, 4 / 3])


def check_decomposition(game, fr, mu, delta, res, m=None, tol=1e-9):
    """Verify a decomposition directly: promise keeping, floors and every
    one-shot deviation on the grid."""
    i = res.active
    prof = fr.a_tilde[i]
    rb = game.rho_bad(i, prof[None])[0]
    gg, gb = res.gamma_good, res.gamma_bad
    value = (1 - delta) * fr.v_tilde[i] + delta * ((1 - rb) * gg + rb * gb)
    assert np.allclose(value, res.target, atol=tol)
    assert fr.lam @ gg == pytest.approx(1.0, abs=tol)
    assert fr.lam @ gb == pytest.approx(1.0, abs=tol)
    assert np.all(gg >= mu - tol) and np.all(gb >= mu - tol)
    for j in range(game.n):
        grid = game.actions[j].grid(m)
        devs = np.tile(prof, (len(grid), 1))
        devs[:, j] = grid
        pb = game.rho_bad(i, devs)
        dev_value = (1 - delta) * game.U(devs)[:, j] + delta * ((1 - pb) * gg[j] + pb * gb[j])
        assert dev_value.max() <= res.target[j] + tol


def test_decompositions_verify_independently(pd_game, pd_frontier, pd_stats):
    orc = DecompositionOracle(pd_game, pd_frontier, MU, 0.85, pd_stats)
    for v in covering_grid(pd_frontier, MU, 41):
        res = orc.decompose(v)
        assert res.feasible
        check_decomposition(pd_game, pd_frontier, MU, 0.85, res)


def test_interior_point_fails_below_threshold(pd_game, pd_frontier, pd_stats):
    res = decomposable(pd_game, pd_frontier, pd_stats, MU, 0.77, [2.0, 2.0])
    assert not res.feasible
    res = decomposable(pd_game, pd_frontier, pd_stats, MU, 0.78, [2.0, 2.0])
    assert res.feasible


def test_self_generation_flips_at_threshold(pd_game, pd_frontier, pd_stats):
    assert not is_self_generating(pd_game, pd_frontier, pd_stats, MU, 7 / 9 - 1e-4).self_generating
    assert is_self_generating(pd_game, pd_frontier, pd_stats, MU, 7 / 9 + 1e-4).self_generating


def test_kappa_thresholds(pd_game, pd_frontier, pd_stats):
    orc = DecompositionOracle(pd_game, pd_frontier, MU, 0.85, pd_stats)
    res = orc.solve(np.array([2.0, 2.0]), 1)
    # kappa+ = rho_g - (v_j - v_tilde_j)/alpha
    assert res.kappa_plus[0] == pytest.approx(0.8 - 2.0 / (5 / 3))


def test_engine_states_are_decomposable(pd_cfg):
    cfg = pd_cfg
    orc = DecompositionOracle(cfg.game, cfg.frontier, cfg.mu, cfg.delta, cfg.stats)
    V = run(cfg, 4, 500).payoffs
    marg, _ = orc.margins(V)
    assert np.all(marg >= -1e-12)


def test_contest_self_generating():
    g = make_contest(m=401)
    fr = efficient_frontier(g, 401)
    st = deviation_stats(g, fr, 401)
    mu = np.array([0.4 / 3, 0.4 / 3])
    assert is_self_generating(g, fr, st, mu, 0.7, k=51, m=401).self_generating
    assert not is_self_generating(g, fr, st, mu, 0.6, k=51, m=401).self_generating


def test_irregular_floor_rejected():
    g = make_table3()
    fr = efficient_frontier(g)
    with pytest.raises(ValueError):
        DecompositionOracle(g, fr, [0.2, 0.2, 0.2], 0.9, deviation_stats(g, fr))


def test_two_player_cases(pd_game, pd_frontier, pd_stats):
    tp = two_player(pd_game, pd_frontier, pd_stats)
    assert tp.case == "interval"
    assert tp.delta_star == pytest.approx(7 / 9)
    assert np.allclose(tp.endpoints, [[8 / 3, 4 / 3], [4 / 3, 8 / 3]])


def test_efficient_set_interval(pd_game, pd_frontier, pd_stats):
    E = efficient_ppe_interval(pd_game, pd_frontier, 8 / 9, pd_stats)
    assert E.connected
    assert E.lower == pytest.approx(4 / 3, abs=1e-9)
    assert E.upper == pytest.approx(8 / 3, abs=1e-9)


def test_efficient_set_below_threshold_is_not_an_interval(pd_game, pd_frontier, pd_stats):
    # the surviving payoffs split into pieces; only their hull is reported
    E = efficient_ppe_interval(pd_game, pd_frontier, 0.7, pd_stats)
    assert E is None or not E.connected
