"""Online construction of efficient equilibrium strategies.

Each period the engine ranks players by an indicator of how far their
continuation payoff sits above its floor relative to what they give up when
not active, lets the top-ranked player use the resource (ties go to the
largest index), and moves the continuation payoff along the efficient
hyperplane according to the public signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .deviation import DeviationStats, check_conditions, corners, deviation_stats
from .errors import ConditionsNotMet, FloorBreach, NonpositiveDenominator
from .game import EfficientFrontier, ReducedGame, efficient_frontier, unilateral_profiles

HYPERPLANE_TOL = 1e-9
FLOOR_TOL = 1e-9
GOOD, BAD = "good", "bad"


@dataclass(frozen=True, eq=False)
class EquilibriumConfig:
    """Everything the engine needs; validated on construction.

    With ``require_conditions`` the constructor refuses floors and discount
    factors at which the sufficiency conditions fail.
    """

    game: ReducedGame
    frontier: EfficientFrontier
    stats: DeviationStats
    mu: np.ndarray
    delta: float
    v0: np.ndarray
    require_conditions: bool = True
    report: object = field(default=None, repr=False)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        v0 = np.asarray(self.v0, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "v0", v0)
        if not 0 < self.delta < 1:
            raise ValueError(f"discount factor must lie in (0, 1), got {self.delta}")
        lam = self.frontier.lam
        if abs(float(lam @ v0) - 1) > HYPERPLANE_TOL:
            raise ValueError(f"v0 is off the efficient hyperplane (lambda.v0 = {lam @ v0:.12g})")
        if np.any(v0 < mu - FLOOR_TOL):
            raise FloorBreach(f"v0 {v0} lies below the floor {mu}")
        if self.require_conditions:
            rep = check_conditions(self.game, self.frontier, self.stats, mu, self.delta)
            object.__setattr__(self, "report", rep)
            if not rep.passed:
                failed = [k for k, c in rep.conditions.items() if c.passed is False]
                if not rep.regular:
                    failed.append("regularity")
                raise ConditionsNotMet(f"conditions fail at mu={mu}, delta={self.delta}: "
                                       + ", ".join(failed))

    @classmethod
    def build(cls, game: ReducedGame, delta: float, mu=None, v0=None, m: int | None = None,
              frontier: EfficientFrontier | None = None, stats: DeviationStats | None = None,
              require_conditions: bool = True) -> "EquilibriumConfig":
        """Fill in the frontier, deviation measures, floors and start point.

        Floors default to their smallest admissible values and ``v0`` to the
        ``lam``-weighted barycenter of the corners of ``V_mu``.
        """
        from .deviation import mu_min

        fr = frontier or efficient_frontier(game, m)
        st = stats or deviation_stats(game, fr, m)
        mu = mu_min(fr, st) if mu is None else np.asarray(mu, dtype=float)
        if v0 is None:
            w = fr.lam / fr.lam.sum()
            v0 = w @ corners(fr, mu)
        return cls(game, fr, st, mu, float(delta), np.asarray(v0, dtype=float),
                   require_conditions)

    @property
    def n(self) -> int:
        return self.frontier.n

    @property
    def lam(self) -> np.ndarray:
        return self.frontier.lam

    @property
    def own(self) -> np.ndarray:
        return self.frontier.own_payoffs()

    @property
    def reward(self) -> np.ndarray:
        """``sum_j lam_j alpha(i, j) rho_bad(i)`` per active player ``i``."""
        return (self.stats.alpha_finite() @ self.lam) * self.stats.rho_bad_tilde


@dataclass(frozen=True)
class ContinuationState:
    t: int
    v: np.ndarray
    last_active: int | None = None


@dataclass(frozen=True)
class StepRecord:
    t: int
    v: np.ndarray
    d: np.ndarray
    active: int
    action: np.ndarray
    signal: str
    v_next: np.ndarray


def _indicators(cfg: EquilibriumConfig, V: np.ndarray) -> np.ndarray:
    lam, own, mu = cfg.lam, cfg.own, cfg.mu
    den = lam * (own - V) + cfg.reward
    if np.any(den <= 0):
        k, j = np.argwhere(den <= 0)[0]
        raise NonpositiveDenominator(
            f"indicator denominator for player {j + 1} is {den[k, j]:.6g} at v={V[k]}")
    return lam * (V - mu) / den


def _select(D: np.ndarray) -> np.ndarray:
    n = D.shape[1]
    return n - 1 - np.argmax(D[:, ::-1], axis=1)


def _inactive_shifts(cfg: EquilibriumConfig, active: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Signal-dependent displacement of the inactive players' continuations
    relative to the pure rescaling around ``v_tilde[i]``."""
    A = cfg.stats.alpha_finite()
    rb = cfg.stats.rho_bad_tilde[active]
    weight = np.where(good, rb, -(1.0 - rb))
    return (1.0 / cfg.delta - 1.0) * A[active] * weight[:, None]


def _next(cfg: EquilibriumConfig, V: np.ndarray, active: np.ndarray, good: np.ndarray) -> np.ndarray:
    # The map expands distances by 1/delta, so the active coordinate is read
    # off the hyperplane rather than updated; otherwise rounding drift off the
    # hyperplane would grow geometrically.
    base = cfg.frontier.v_tilde[active]
    out = base + (V - base) / cfg.delta + _inactive_shifts(cfg, active, good)
    rows = np.arange(len(active))
    lam = cfg.lam
    rest = np.zeros(len(active))
    for j in range(cfg.n):
        rest += np.where(active == j, 0.0, lam[j] * out[:, j])
    out[rows, active] = (1.0 - rest) / lam[active]
    return out


def _advance(cfg: EquilibriumConfig, V: np.ndarray, good: np.ndarray | None = None):
    """Vectorised state update; returns ``(active, D, V_good, V_bad)`` or, when
    ``good`` is given, ``(active, D, V_next)``."""
    D = _indicators(cfg, V)
    active = _select(D)
    if good is None:
        ones = np.ones(len(active), dtype=bool)
        return active, D, _next(cfg, V, active, ones), _next(cfg, V, active, ~ones)
    return active, D, _next(cfg, V, active, good)


def indicators(cfg: EquilibriumConfig, v) -> np.ndarray:
    return _indicators(cfg, np.atleast_2d(np.asarray(v, dtype=float)))[0]


def indicator(cfg: EquilibriumConfig, state: ContinuationState, j: int) -> float:
    return float(indicators(cfg, state.v)[j])


def select_active(cfg: EquilibriumConfig, state: ContinuationState) -> int:
    return int(_select(np.atleast_2d(indicators(cfg, state.v)))[0])


def continuations(cfg: EquilibriumConfig, v) -> tuple[int, np.ndarray, np.ndarray]:
    """Active player and the continuation payoffs after a good and a bad signal."""
    active, _, g, b = _advance(cfg, np.atleast_2d(np.asarray(v, dtype=float)))
    return int(active[0]), g[0], b[0]


def _check_floor(cfg: EquilibriumConfig, V: np.ndarray) -> None:
    low = V < cfg.mu - FLOOR_TOL
    if np.any(low):
        k, j = np.argwhere(low)[0]
        raise FloorBreach(f"continuation {V[k]} breaks floor of player {j + 1} ({cfg.mu[j]:.12g})")


def _is_good(signal) -> bool:
    if isinstance(signal, str):
        if signal not in (GOOD, BAD):
            raise ValueError(f"signal must be 'good' or 'bad', got {signal!r}")
        return signal == GOOD
    return bool(signal)


def step(cfg: EquilibriumConfig, state: ContinuationState, signal) -> tuple[ContinuationState, StepRecord]:
    """Advance one period after observing ``signal`` ('good'/'bad' or a bool)."""
    good = _is_good(signal)
    V = np.atleast_2d(state.v)
    active, D, nxt = _advance(cfg, V, np.array([good]))
    _check_floor(cfg, nxt)
    i = int(active[0])
    rec = StepRecord(state.t, state.v.copy(), D[0], i, cfg.frontier.a_tilde[i].copy(),
                     GOOD if good else BAD, nxt[0])
    return ContinuationState(state.t + 1, nxt[0], i), rec


@dataclass
class Trajectory:
    records: list[StepRecord]

    @property
    def actives(self) -> np.ndarray:
        return np.array([r.active for r in self.records], dtype=int)

    @property
    def payoffs(self) -> np.ndarray:
        """States visited, including the final one."""
        if not self.records:
            return np.empty((0, 0))
        return np.vstack([r.v for r in self.records] + [self.records[-1].v_next])

    @property
    def indicators(self) -> np.ndarray:
        return np.vstack([r.d for r in self.records])

    def rows(self):
        for r in self.records:
            yield [r.t, r.active + 1, r.signal, *r.v.tolist(), *r.d.tolist()]

    def header(self, n: int) -> list[str]:
        return (["t", "active", "signal"] + [f"v_{k + 1}" for k in range(n)]
                + [f"d_{k + 1}" for k in range(n)])


def signal_stream(seed: int, episode: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, episode)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(episode),))
    return np.random.Generator(np.random.Philox(ss))


def run(cfg: EquilibriumConfig, signals, T: int | None = None) -> Trajectory:
    """Play ``T`` periods.

    ``signals`` is either a recorded sequence of signals or an integer seed;
    with a seed, period ``t`` is bad when the ``t``-th uniform draw falls
    below the bad-signal probability at the recommended profile.
    """
    if isinstance(signals, (int, np.integer)):
        if T is None or T < 1:
            raise ValueError("a seeded run needs T >= 1")
        uniforms = signal_stream(int(signals)).random(T)
        recorded = None
    else:
        recorded = list(signals)
        T = len(recorded) if T is None else T
        if T < 1 or T > len(recorded):
            raise ValueError(f"need 1 <= T <= {len(recorded)}")
    state = ContinuationState(0, cfg.v0.copy())
    recs = []
    rb = cfg.stats.rho_bad_tilde
    for t in range(T):
        if recorded is None:
            i = select_active(cfg, state)
            sig = uniforms[t] >= rb[i]
        else:
            sig = recorded[t]
        state, rec = step(cfg, state, sig)
        recs.append(rec)
    return Trajectory(recs)


def incentive_gaps(cfg: EquilibriumConfig, v, m: int | None = None) -> dict[int, np.ndarray]:
    """Deviation value minus promised value for every player and grid action.

    Nonpositive entries mean the deviation is not profitable given the
    engine's continuation payoffs at ``v``.
    """
    game = cfg.game
    i, g, b = continuations(cfg, v)
    v = np.asarray(v, dtype=float)
    out = {}
    for j in range(cfg.n):
        grid = game.actions[j].grid(m)
        prof = unilateral_profiles(cfg.frontier.a_tilde[i], j, grid)
        pb = game.rho_bad(i, prof)
        value = (1 - cfg.delta) * game.U(prof)[:, j] + cfg.delta * ((1 - pb) * g[j] + pb * b[j])
        out[j] = value - v[j]
    return out


def promise_gap(cfg: EquilibriumConfig, v) -> np.ndarray:
    """``(1 - delta) U(a_tilde[i]) + delta E[continuation] - v`` componentwise."""
    i, g, b = continuations(cfg, v)
    rb = cfg.stats.rho_bad_tilde[i]
    return ((1 - cfg.delta) * cfg.frontier.v_tilde[i]
            + cfg.delta * ((1 - rb) * g + rb * b) - np.asarray(v, dtype=float))
