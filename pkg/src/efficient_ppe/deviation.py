"""Benefits from deviation and the conditions for efficient self-generation.

``alpha[i, j]`` is the largest ratio of player ``j``'s gain from a profitable
unilateral deviation at ``a_tilde[i]`` to the increase it causes in the
probability of ``i``'s bad signal; ``beta[i, j]`` is the smallest such ratio
over deviations that lose utility but lower the bad-signal probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateDenominator,
    InfeasibleMu,
    LabelingViolation,
    SingletonSet,
)
from .game import EfficientFrontier, ReducedGame, unilateral_profiles

STRICT_TOL = 1e-12
MU_TOL = 1e-12


@dataclass(frozen=True)
class DeviationStats:
    """Pairwise deviation measures; diagonal entries are NaN."""

    alpha: np.ndarray
    beta: np.ndarray
    alpha_witness: dict = field(default_factory=dict)
    beta_witness: dict = field(default_factory=dict)
    rho_bad_tilde: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    def alpha_finite(self) -> np.ndarray:
        """``alpha`` with ``-inf`` (no profitable deviation) and the diagonal set to 0."""
        a = np.where(np.isfinite(self.alpha), self.alpha, 0.0)
        np.fill_diagonal(a, 0.0)
        return a


def _ratios(game, fr, i, j, values):
    prof = unilateral_profiles(fr.a_tilde[i], j, values)
    gain = game.U(prof)[:, j] - fr.v_tilde[i, j]
    dbad = game.rho_bad(i, prof) - game.rho_bad(i, fr.a_tilde[i])[0]
    return gain, dbad


def _refine(fn, grid, k, sign):
    """Polish an extremum found at ``grid[k]`` with a bounded scalar search."""
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if hi <= lo:
        return None
    res = minimize_scalar(lambda x: -sign * fn(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, hi - lo)})
    return float(res.x), float(fn(res.x))


def alpha(game: ReducedGame, fr: EfficientFrontier, i: int, j: int, m: int | None = None,
          refine: bool = True):
    """Return ``(alpha(i, j), witness action)``.

    ``-inf`` with witness ``None`` when ``j`` has no profitable deviation from
    ``a_tilde[i]``.  Raises LabelingViolation when a profitable deviation does
    not raise the bad-signal probability.
    """
    if i == j:
        raise ValueError("alpha needs distinct players")
    space = game.actions[j]
    grid = space.grid(m)
    gain, dbad = _ratios(game, fr, i, j, grid)
    prof = gain > STRICT_TOL
    if not prof.any():
        return -np.inf, None
    breach = prof & (dbad <= STRICT_TOL)
    if breach.any():
        k = int(np.flatnonzero(breach)[0])
        raise LabelingViolation(
            f"deviation {space.describe(grid[k])} by player {j + 1} at player {i + 1}'s "
            f"preferred profile gains {gain[k]:.6g} but moves the bad signal by {dbad[k]:.6g}",
            i=i, j=j, action=space.describe(grid[k]))
    ratio = np.full(grid.shape, -np.inf)
    ratio[prof] = gain[prof] / dbad[prof]
    k = int(np.argmax(ratio))
    best, arg = float(ratio[k]), float(grid[k])
    if refine and not space.is_finite:
        def f(x):
            g, d = _ratios(game, fr, i, j, np.array([x]))
            return g[0] / d[0] if g[0] > STRICT_TOL and d[0] > STRICT_TOL else 0.0

        out = _refine(f, grid, k, +1)
        if out is not None and out[1] > best:
            arg, best = out
    return best, arg


def beta(game: ReducedGame, fr: EfficientFrontier, i: int, j: int, m: int | None = None,
         refine: bool = True):
    """Return ``(beta(i, j), witness action)``; ``+inf`` and ``None`` on the empty set."""
    if i == j:
        raise ValueError("beta needs distinct players")
    space = game.actions[j]
    grid = space.grid(m)
    gain, dbad = _ratios(game, fr, i, j, grid)
    ok = (gain < -STRICT_TOL) & (dbad < -STRICT_TOL)
    if not ok.any():
        return np.inf, None
    ratio = np.full(grid.shape, np.inf)
    ratio[ok] = gain[ok] / dbad[ok]
    k = int(np.argmin(ratio))
    best, arg = float(ratio[k]), float(grid[k])
    if refine and not space.is_finite:
        def f(x):
            g, d = _ratios(game, fr, i, j, np.array([x]))
            return g[0] / d[0] if g[0] < -STRICT_TOL and d[0] < -STRICT_TOL else best

        out = _refine(f, grid, k, -1)
        if out is not None and out[1] < best:
            arg, best = out
    return best, arg


def deviation_stats(game: ReducedGame, fr: EfficientFrontier, m: int | None = None,
                    refine: bool = True) -> DeviationStats:
    """Evaluate ``alpha`` and ``beta`` for every ordered pair of distinct players."""
    game.require_binary()
    n = game.n
    A = np.full((n, n), np.nan)
    Bt = np.full((n, n), np.nan)
    wa, wb = {}, {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            A[i, j], wa[(i, j)] = alpha(game, fr, i, j, m, refine)
            Bt[i, j], wb[(i, j)] = beta(game, fr, i, j, m, refine)
    rb = np.array([game.rho_bad(i, fr.a_tilde[i])[0] for i in range(n)])
    return DeviationStats(A, Bt, wa, wb, rb)


def check_prop1(game: ReducedGame, fr: EfficientFrontier, i: int, m: int | None = None) -> bool:
    """True when no player can gain by deviating alone from ``a_tilde[i]``."""
    for j in range(game.n):
        if j == i:
            continue
        gain, _ = _ratios(game, fr, i, j, game.actions[j].grid(m))
        if np.any(gain > STRICT_TOL):
            return False
    return True


def mu_min(fr: EfficientFrontier, stats: DeviationStats) -> np.ndarray:
    """Smallest floors allowed by the inactive-player punishment bound.

    ``mu_i >= max_{j != i} (v_tilde[j, i] + alpha[j, i] (1 - rho_bad(j)))``;
    pairs with ``alpha = -inf`` impose nothing, and the floor never drops
    below the smallest payoff ``i`` receives on the frontier.
    """
    n = fr.n
    out = np.empty(n)
    for i in range(n):
        terms = [fr.v_tilde[j, i] + stats.alpha[j, i] * (1 - stats.rho_bad_tilde[j])
                 for j in range(n) if j != i and np.isfinite(stats.alpha[j, i])]
        out[i] = max(terms) if terms else float(np.min(fr.v_tilde[:, i]))
    return out


def corners(fr: EfficientFrontier, mu) -> np.ndarray:
    """Row ``i`` is the point of ``V_mu`` that is best for ``i``."""
    mu = np.asarray(mu, dtype=float)
    lam = fr.lam
    _check_mu(lam, mu)
    vhat = np.tile(mu, (fr.n, 1))
    total = float(lam @ mu)
    for i in range(fr.n):
        vhat[i, i] = (1 - (total - lam[i] * mu[i])) / lam[i]
    return vhat


def _check_mu(lam, mu) -> float:
    total = float(lam @ mu)
    if total > 1 + MU_TOL:
        raise InfeasibleMu(f"weighted floor sum {total:.12g} exceeds 1; V_mu is empty",
                           mu=mu, weighted_sum=total)
    return total


def regularity(fr: EfficientFrontier, mu):
    """Return ``(regular, vhat, theta)``.

    ``theta[i]`` holds the barycentric coordinates of corner ``vhat[i]`` in the
    basis of preferred payoffs; the set is regular when all are nonnegative.
    """
    vhat = corners(fr, mu)
    theta = np.linalg.solve(fr.v_tilde.T, vhat.T).T
    return bool(np.all(theta >= -1e-12)), vhat, theta


def min_discount(fr: EfficientFrontier, stats: DeviationStats, mu) -> float:
    """Smallest discount factor at which ``V_mu`` is self-generating."""
    mu = np.asarray(mu, dtype=float)
    lam = fr.lam
    total = _check_mu(lam, mu)
    num = 1 - total
    if num <= MU_TOL:
        raise SingletonSet("V_mu is a single point; no discount factor is reported",
                           mu=mu, weighted_sum=total)
    a = stats.alpha_finite()
    den = -1.0
    for i in range(fr.n):
        den += lam[i] * fr.v_tilde[i, i] + float(lam @ a[i]) * stats.rho_bad_tilde[i]
    if den <= 0:
        raise DegenerateDenominator(f"discount denominator {den:.6g} is not positive")
    return 1.0 / (1.0 + num / den)


# --------------------------------------------------------------------------
# Condition report


@dataclass
class ConditionResult:
    passed: bool | None
    margin: float
    witness: str = ""


@dataclass
class ConditionReport:
    cond1: ConditionResult
    cond2: ConditionResult
    cond3: ConditionResult
    cond4: ConditionResult
    mu: np.ndarray
    mu_min: np.ndarray
    weighted_sum: float
    delta: float | None
    delta_min: float | None
    regular: bool
    vhat: np.ndarray
    theta: np.ndarray

    @property
    def conditions(self) -> dict[str, ConditionResult]:
        return {"cond1": self.cond1, "cond2": self.cond2, "cond3": self.cond3, "cond4": self.cond4}

    @property
    def passed(self) -> bool:
        return self.regular and all(c.passed is not False for c in self.conditions.values())


def _cond1(stats: DeviationStats) -> ConditionResult:
    margin, wit = np.inf, ""
    for i in range(stats.n):
        for j in range(stats.n):
            if i == j or not np.isfinite(stats.alpha[i, j]):
                continue
            gap = stats.beta[i, j] - stats.alpha[i, j]
            if gap < margin:
                margin, wit = float(gap), f"i={i + 1} j={j + 1}"
    return ConditionResult(bool(margin >= -STRICT_TOL), margin, wit)


def _cond2_violation(game, fr, stats, i, values):
    prof = unilateral_profiles(fr.a_tilde[i], i, values)
    loss = fr.v_tilde[i, i] - game.U(prof)[:, i]
    dbad = game.rho_bad(i, prof) - stats.rho_bad_tilde[i]
    weight = float(fr.lam @ stats.alpha_finite()[i]) / fr.lam[i]
    return weight * dbad - loss


def _cond2(game, fr, stats, m) -> ConditionResult:
    margin, wit = np.inf, ""
    for i in range(fr.n):
        space = game.actions[i]
        grid = space.grid(m)
        grid = grid[np.abs(grid - fr.a_tilde[i, i]) > 1e-15]
        if grid.size == 0:
            continue
        viol = _cond2_violation(game, fr, stats, i, grid)
        k = int(np.argmax(viol))
        worst, arg = float(viol[k]), float(grid[k])
        if not space.is_finite:
            out = _refine(lambda x: _cond2_violation(game, fr, stats, i, np.array([x]))[0],
                          grid, k, +1)
            if out is not None and out[1] > worst and abs(out[0] - fr.a_tilde[i, i]) > 1e-15:
                arg, worst = out
        if -worst < margin:
            margin, wit = -worst, f"i={i + 1} a_i={space.describe(arg)}"
    return ConditionResult(bool(margin >= -STRICT_TOL), float(margin), wit)


def check_conditions(game: ReducedGame, fr: EfficientFrontier, stats: DeviationStats,
                     mu=None, delta: float | None = None, m: int | None = None) -> ConditionReport:
    """Evaluate the four conditions plus regularity at floors ``mu`` and discount ``delta``.

    ``mu`` defaults to the smallest admissible floors.  ``delta=None`` leaves
    the discount condition unevaluated.  Raises InfeasibleMu when the floors
    leave no efficient payoff.
    """
    lo = mu_min(fr, stats)
    mu = lo.copy() if mu is None else np.asarray(mu, dtype=float)
    total = _check_mu(fr.lam, mu)
    c1 = _cond1(stats)
    c2 = _cond2(game, fr, stats, m)
    gap = mu - lo
    k = int(np.argmin(gap))
    c3 = ConditionResult(bool(gap[k] >= -MU_TOL), float(gap[k]), f"i={k + 1}")
    regular, vhat, theta = regularity(fr, mu)
    try:
        dmin = min_discount(fr, stats, mu)
    except (SingletonSet, DegenerateDenominator) as exc:
        dmin = None
        c4 = ConditionResult(False, -np.inf, str(exc))
    else:
        if delta is None:
            c4 = ConditionResult(None, np.nan, "no discount factor given")
        else:
            c4 = ConditionResult(bool(delta >= dmin - STRICT_TOL), float(delta - dmin),
                                 f"delta_min={dmin:.12g}")
    return ConditionReport(c1, c2, c3, c4, mu, lo, total, delta, dmin, regular, vhat, theta)
