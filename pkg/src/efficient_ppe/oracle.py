"""Brute-force decomposability checks on efficient payoff sets.

A target ``v`` on the efficient hyperplane is decomposed by playing some
preferred profile ``a_tilde[i]`` and promising continuations ``gamma(y_g)``
and ``gamma(y_b)``.  Writing ``p0`` for the good-signal probability at
``a_tilde[i]``, promise keeping pins down the mean

    w_j = (v_j - (1 - delta) U_j(a_tilde[i])) / delta

and leaves one free spread ``s_j = gamma_j(y_g) - gamma_j(y_b)`` per player,
with ``gamma_j(y_g) = w_j + (1 - p0) s_j`` and ``gamma_j(y_b) = w_j - p0 s_j``.
Every deviation constraint then bounds ``s_j`` on one side, the floors bound
it on both sides, and both continuations stay on the hyperplane exactly when
``sum_j lam_j s_j = 0``.  Feasibility of a box intersected with one
hyperplane is decided in closed form, so the check is exact on the
deviation grid for any number of players.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .deviation import DeviationStats, check_conditions, corners, min_discount, mu_min, regularity
from .errors import InfeasibleMu, SingletonSet
from .game import EfficientFrontier, ReducedGame, unilateral_profiles

FEAS_TOL = 1e-12
GAIN_TOL = 1e-12


@dataclass
class DecomposabilityResult:
    target: np.ndarray
    feasible: bool
    margin: float
    active: int | None = None
    profile: np.ndarray | None = None
    gamma_good: np.ndarray | None = None
    gamma_bad: np.ndarray | None = None
    binding: list[str] = field(default_factory=list)
    kappa_plus: dict = field(default_factory=dict)
    kappa_minus: dict = field(default_factory=dict)


class _Bounds:
    """Spread bounds implied by the deviation constraints, per active player.

    They depend on the discount factor and the game only, not on the target.
    """

    def __init__(self, game: ReducedGame, fr: EfficientFrontier, stats: DeviationStats | None,
                 delta: float, m: int | None):
        n = game.n
        self.p0 = np.empty(n)
        self.lo = np.full((n, n), -np.inf)
        self.hi = np.full((n, n), np.inf)
        self.lo_tag = [[""] * n for _ in range(n)]
        self.hi_tag = [[""] * n for _ in range(n)]
        scale = (1 - delta) / delta
        for i in range(n):
            a = fr.a_tilde[i]
            rb0 = game.rho_bad(i, a)[0]
            self.p0[i] = 1 - rb0
            for j in range(n):
                values = game.actions[j].grid(m)
                if stats is not None and j != i:
                    extra = [w for w in (stats.alpha_witness.get((i, j)),
                                         stats.beta_witness.get((i, j))) if w is not None]
                    values = np.concatenate([values, np.asarray(extra, dtype=float)])
                prof = unilateral_profiles(a, j, values)
                gain = game.U(prof)[:, j] - fr.v_tilde[i, j]
                dbad = game.rho_bad(i, prof) - rb0
                up = dbad > 0
                if np.any(up):
                    b = scale * gain[up] / dbad[up]
                    k = int(np.argmax(b))
                    self.lo[i, j] = b[k]
                    self.lo_tag[i][j] = f"IC+ j={j + 1} a_j={game.actions[j].describe(values[up][k])}"
                down = dbad < 0
                if np.any(down):
                    b = scale * gain[down] / dbad[down]
                    k = int(np.argmin(b))
                    self.hi[i, j] = b[k]
                    self.hi_tag[i][j] = f"IC- j={j + 1} a_j={game.actions[j].describe(values[down][k])}"
                flat = (dbad == 0) & (gain > GAIN_TOL)
                if np.any(flat):
                    # a profitable deviation the signal cannot detect
                    self.lo[i, j] = np.inf
                    self.lo_tag[i][j] = f"undetectable j={j + 1}"


class DecompositionOracle:
    """Decomposability of efficient targets with continuations in ``V_mu``.

    Requires ``V_mu`` to be regular, so that ``V_mu`` is exactly the part of
    the hyperplane above the floors.
    """

    def __init__(self, game: ReducedGame, fr: EfficientFrontier, mu, delta: float,
                 stats: DeviationStats | None = None, m: int | None = None,
                 check_regular: bool = True):
        game.require_binary()
        self.game, self.fr, self.delta = game, fr, float(delta)
        self.mu = np.asarray(mu, dtype=float)
        if check_regular:
            regular, _, _ = regularity(fr, self.mu)
            if not regular:
                raise ValueError("the oracle needs a regular floor vector")
        self.stats = stats
        self.bounds = _Bounds(game, fr, stats, self.delta, m)

    def _box(self, V: np.ndarray, i: int):
        d = self.delta
        p0 = self.bounds.p0[i]
        w = (V - (1 - d) * self.fr.v_tilde[i]) / d
        flo = (self.mu - w) / (1 - p0)
        fhi = (w - self.mu) / p0
        lo = np.maximum(self.bounds.lo[i], flo)
        hi = np.minimum(self.bounds.hi[i], fhi)
        return w, lo, hi, flo, fhi

    def margins(self, V) -> tuple[np.ndarray, np.ndarray]:
        """Best margin over active players and the player attaining it, per row.

        A nonnegative margin means the target decomposes; the margin is the
        slack of the tightest of the box and hyperplane conditions.
        """
        V = np.atleast_2d(np.asarray(V, dtype=float))
        lam = self.fr.lam
        best = np.full(len(V), -np.inf)
        arg = np.zeros(len(V), dtype=int)
        for i in range(self.fr.n):
            _, lo, hi, _, _ = self._box(V, i)
            with np.errstate(invalid="ignore"):
                width = np.min(lam * (hi - lo), axis=1)
                top = hi @ lam
                bottom = lo @ lam
            marg = np.minimum(width, np.minimum(top, -bottom))
            marg = np.where(np.isnan(marg), -np.inf, marg)
            take = marg > best
            best = np.where(take, marg, best)
            arg = np.where(take, i, arg)
        return best, arg

    def solve(self, v, i: int) -> DecomposabilityResult:
        v = np.asarray(v, dtype=float)
        lam = self.fr.lam
        w, lo, hi, flo, fhi = (x[0] for x in self._box(v[None, :], i))
        marg = float(min(np.min(lam * (hi - lo)), hi @ lam, -(lo @ lam)))
        res = DecomposabilityResult(v, marg >= -FEAS_TOL, marg, i, self.fr.a_tilde[i].copy())
        res.kappa_plus, res.kappa_minus = self._kappas(v, i)
        if not res.feasible:
            return res
        s = np.clip(0.0, lo, hi)
        others = [j for j in range(len(v)) if j != i]
        s[i] = -sum(lam[j] * s[j] for j in others) / lam[i]
        if not lo[i] - FEAS_TOL <= s[i] <= hi[i] + FEAS_TOL:
            span = hi - lo
            t = -(lo @ lam) / (span @ lam) if span @ lam > 0 else 0.0
            s = lo + t * span
        p0 = self.bounds.p0[i]
        res.gamma_good = w + (1 - p0) * s
        res.gamma_bad = w - p0 * s
        tags = []
        for j in range(len(v)):
            if abs(s[j] - self.bounds.lo[i, j]) <= 1e-9:
                tags.append(self.bounds.lo_tag[i][j])
            if abs(s[j] - self.bounds.hi[i, j]) <= 1e-9:
                tags.append(self.bounds.hi_tag[i][j])
            if abs(s[j] - flo[j]) <= 1e-9:
                tags.append(f"floor(y_g) j={j + 1}")
            if abs(s[j] - fhi[j]) <= 1e-9:
                tags.append(f"floor(y_b) j={j + 1}")
        res.binding = tags
        return res

    def _kappas(self, v, i):
        kp, km = {}, {}
        if self.stats is None:
            return kp, km
        p0 = self.bounds.p0[i]
        for j in range(len(v)):
            if j == i:
                continue
            excess = v[j] - self.fr.v_tilde[i, j]
            a = self.stats.alpha[i, j]
            b = self.stats.beta[i, j]
            kp[j] = p0 - excess / a if np.isfinite(a) else -np.inf
            km[j] = p0 - excess / b if np.isfinite(b) and b > 0 else (p0 if np.isinf(b) else -np.inf)
        return kp, km

    def decompose(self, v) -> DecomposabilityResult:
        """Try every active player; report the one with the largest margin."""
        v = np.asarray(v, dtype=float)
        _, arg = self.margins(v)
        return self.solve(v, int(arg[0]))


def decomposable(game: ReducedGame, fr: EfficientFrontier, stats: DeviationStats, mu,
                 delta: float, v, m: int | None = None) -> DecomposabilityResult:
    return DecompositionOracle(game, fr, mu, delta, stats, m).decompose(v)


def covering_grid(fr: EfficientFrontier, mu, k: int = 101, max_points: int = 200_000) -> np.ndarray:
    """Points of ``V_mu`` on a barycentric lattice of its corners with ``k``
    points per edge (fewer when the lattice would exceed ``max_points``)."""
    vhat = corners(fr, mu)
    n = fr.n
    steps = k - 1
    while steps > 1 and _lattice_size(n, steps) > max_points:
        steps -= 1
    pts = []
    for combo in itertools.product(range(steps + 1), repeat=n - 1):
        if sum(combo) <= steps:
            pts.append(combo + (steps - sum(combo),))
    weights = np.asarray(pts, dtype=float) / steps
    return weights @ vhat


def _lattice_size(n: int, steps: int) -> int:
    from math import comb

    return comb(steps + n - 1, n - 1)


@dataclass
class SelfGenerationResult:
    self_generating: bool
    worst_point: np.ndarray
    worst_margin: float
    points: np.ndarray
    margins: np.ndarray
    actives: np.ndarray


def is_self_generating(game: ReducedGame, fr: EfficientFrontier, stats: DeviationStats, mu,
                       delta: float, k: int = 101, m: int | None = None) -> SelfGenerationResult:
    """Decompose every point of a covering grid of ``V_mu`` within ``V_mu``.

    The worst point is the smallest margin, ties broken by the
    lexicographically smallest point, so the answer does not depend on the
    evaluation order.
    """
    mu = np.asarray(mu, dtype=float)
    total = float(fr.lam @ mu)
    if total > 1 + 1e-12:
        raise InfeasibleMu(f"weighted floor sum {total:.12g} exceeds 1", mu=mu, weighted_sum=total)
    if total >= 1 - 1e-12:
        raise SingletonSet("V_mu is a single point", mu=mu, weighted_sum=total)
    oracle = DecompositionOracle(game, fr, mu, delta, stats, m)
    P = covering_grid(fr, mu, k)
    marg, act = oracle.margins(P)
    order = np.lexsort(tuple(P[:, c] for c in range(P.shape[1] - 1, -1, -1)) + (marg,))
    w = int(order[0])
    return SelfGenerationResult(bool(marg[w] >= -FEAS_TOL), P[w], float(marg[w]), P, marg, act)


# --------------------------------------------------------------------------
# Two players


@dataclass
class TwoPlayerCharacterization:
    case: str
    mu_bar: np.ndarray | None
    delta_star: float | None
    reason: str
    prop1: tuple[bool, bool] = (False, False)
    endpoints: np.ndarray | None = None

    def describe(self) -> str:
        if self.case != "interval":
            return f"no efficient PPE: {self.reason}"
        a, b = self.endpoints
        return (f"E = segment from {np.array2string(a, precision=6)} to "
                f"{np.array2string(b, precision=6)} for delta >= {self.delta_star:.12g}")


def two_player(game: ReducedGame, fr: EfficientFrontier, stats: DeviationStats,
               m: int | None = None) -> TwoPlayerCharacterization:
    """Efficient equilibrium payoffs of a two-player game.

    No efficient payoff beyond the preferred profiles themselves is supported
    when the deviation-ratio or active-player condition fails, or when the
    smallest floors leave an empty or single-point set.  Otherwise the set is
    everything above the smallest floors, from the smallest discount factor
    at those floors on.
    """
    from .deviation import check_prop1

    if game.n != 2:
        raise ValueError("the two-player characterization needs exactly two players")
    p1 = (check_prop1(game, fr, 0, m), check_prop1(game, fr, 1, m))
    lo = mu_min(fr, stats)
    try:
        rep = check_conditions(game, fr, stats, lo, None, m)
    except InfeasibleMu as exc:
        return TwoPlayerCharacterization("no-efficient-PPE", lo, None,
                                         f"smallest floors are infeasible ({exc})", p1)
    if not rep.cond1.passed:
        return TwoPlayerCharacterization("no-efficient-PPE", lo, None,
                                         f"deviation ratios cross at {rep.cond1.witness}", p1)
    if not rep.cond2.passed:
        return TwoPlayerCharacterization("no-efficient-PPE", lo, None,
                                         f"active player can profit at {rep.cond2.witness}", p1)
    try:
        dstar = min_discount(fr, stats, lo)
    except SingletonSet:
        return TwoPlayerCharacterization("no-efficient-PPE", lo, None,
                                         "smallest floors leave a single point", p1)
    return TwoPlayerCharacterization("interval", lo, dstar, "conditions hold", p1, rep.vhat)


@dataclass
class EfficientSet:
    """Efficient equilibrium payoffs of a two-player game as an interval of ``v_1``."""

    lower: float
    upper: float
    connected: bool
    iterations: int

    def endpoints(self, fr: EfficientFrontier) -> np.ndarray:
        lam = fr.lam
        xs = np.array([self.lower, self.upper])
        return np.stack([xs, (1 - lam[0] * xs) / lam[1]], axis=1)


def _fm_interval(rows: list[tuple[float, float, float]], tol: float = FEAS_TOL):
    """Range of ``x`` such that some ``s`` satisfies ``a x + b s <= c`` for every row.

    Fourier-Motzkin elimination of ``s``; returns ``None`` when empty.
    """
    keep, pos, neg = [], [], []
    for a, b, c in rows:
        if b > 0:
            pos.append((a / b, c / b))
        elif b < 0:
            neg.append((-a / b, -c / b))
        else:
            keep.append((a, c))
    # s <= c'/1 - a' x for pos rows, s >= a'' x - c'' for neg rows
    for ap, cp in pos:
        for an, cn in neg:
            keep.append((ap + an, cp + cn))
    lo, hi = -np.inf, np.inf
    for a, c in keep:
        if a > 0:
            hi = min(hi, c / a)
        elif a < 0:
            lo = max(lo, c / a)
        elif c < -tol:
            return None
    if lo > hi + tol:
        return None
    return lo, max(lo, hi)


def efficient_ppe_interval(game: ReducedGame, fr: EfficientFrontier, delta: float,
                           stats: DeviationStats | None = None, m: int | None = None,
                           tol: float = 1e-13, max_iter: int = 100_000) -> EfficientSet | None:
    """Iterate the decomposition operator on efficient payoff intervals.

    Starts from the whole efficient segment; each round keeps the payoffs
    that decompose with continuations in the current interval.  The union
    over active players is replaced by its hull, and ``connected`` records
    whether the union was already an interval.
    """
    if game.n != 2:
        raise ValueError("efficient_ppe_interval needs exactly two players")
    lam = fr.lam
    V = fr.v_tilde
    e = np.array([0.0, 1 / lam[1]])
    f = np.array([1.0, -lam[0] / lam[1]])
    c = np.array([1.0, -lam[0] / lam[1]])
    xl, xh = float(V[:, 0].min()), float(V[:, 0].max())
    bounds = _Bounds(game, fr, stats, delta, m)
    connected = True
    for it in range(1, max_iter + 1):
        mu = np.array([xl, (1 - lam[0] * xh) / lam[1]])
        pieces = []
        for i in range(2):
            p0 = bounds.p0[i]
            if np.any(bounds.lo[i] == np.inf):
                continue
            rows = [(1.0, 0.0, float(V[:, 0].max())), (-1.0, 0.0, -float(V[:, 0].min()))]
            for j in range(2):
                const = (e[j] - (1 - delta) * V[i, j]) / delta
                slope = f[j] / delta
                if np.isfinite(bounds.lo[i, j]):
                    rows.append((0.0, -c[j], -bounds.lo[i, j]))
                if np.isfinite(bounds.hi[i, j]):
                    rows.append((0.0, c[j], bounds.hi[i, j]))
                rows.append((-slope, -(1 - p0) * c[j], const - mu[j]))
                rows.append((-slope, p0 * c[j], const - mu[j]))
            piece = _fm_interval(rows)
            if piece is not None:
                pieces.append(piece)
        if not pieces:
            return None
        pieces.sort()
        connected = all(pieces[k + 1][0] <= pieces[k][1] + 1e-12 for k in range(len(pieces) - 1))
        nl, nh = max(xl, min(p[0] for p in pieces)), min(xh, max(p[1] for p in pieces))
        if nl > nh + FEAS_TOL:
            return None
        nh = max(nl, nh)
        change = max(abs(nl - xl), abs(nh - xh))
        xl, xh = nl, nh
        if change < tol:
            return EfficientSet(xl, xh, connected, it)
    return EfficientSet(xl, xh, connected, max_iter)
