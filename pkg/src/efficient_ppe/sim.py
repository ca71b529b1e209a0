"""Monte Carlo play of the engine's strategy, with optional unilateral deviations.

Episodes are simulated in lock-step as rows of one array.  Every episode
draws its signals from its own counter-based stream keyed by
``(seed, episode)``; period ``t`` consumes the ``t``-th uniform, so results
do not depend on how episodes are batched.  Stage payoffs are expected
utilities of the played profile, and the signal is bad when the uniform
falls below the bad-signal probability of that profile.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .engine import EquilibriumConfig, _advance, _check_floor, signal_stream
from .errors import TruncationTooCoarse
from .game import joint_grid, unilateral_profiles


@dataclass(frozen=True)
class DeviationPolicy:
    """How player ``deviator`` departs from the recommendation.

    ``stationary`` always plays ``action``; ``one-shot`` plays it in period 0
    and complies afterwards; ``myopic`` plays the grid action with the best
    current-period utility against the recommended profile; ``comply``
    follows the recommendation.  All of them use public information only.
    """

    deviator: int
    mode: str = "stationary"
    action: float | None = None

    def __post_init__(self):
        if self.mode not in ("stationary", "one-shot", "myopic", "comply"):
            raise ValueError(f"unknown deviation mode {self.mode!r}")
        if self.mode in ("stationary", "one-shot") and self.action is None:
            raise ValueError(f"mode {self.mode!r} needs an action")


@dataclass
class EpisodeResult:
    payoff: np.ndarray
    digest: str
    seed: int
    episode: int


@dataclass
class SimulationResult:
    mean: np.ndarray
    stderr: np.ndarray
    payoffs: np.ndarray
    digests: list[str]
    bad_rate: float
    expected_bad_rate: float
    seed: int
    horizon: int

    def episode(self, k: int) -> EpisodeResult:
        return EpisodeResult(self.payoffs[k].copy(), self.digests[k], self.seed, k)


def payoff_range(cfg: EquilibriumConfig, budget: int = 100_000) -> float:
    U = cfg.game.U(joint_grid(cfg.game, budget=budget))
    return float(U.max() - U.min())


def check_truncation(cfg: EquilibriumConfig, T: int, eps_trunc: float | None = None) -> float:
    """Raise unless ``delta**T * range <= eps_trunc`` (default ``1e-9 * range``)."""
    rng = payoff_range(cfg)
    eps = 1e-9 * rng if eps_trunc is None else eps_trunc
    err = cfg.delta ** T * rng
    if err > eps:
        raise TruncationTooCoarse(
            f"horizon {T} leaves truncation error {err:.3g} above {eps:.3g}; "
            f"need T >= {math.ceil(math.log(eps / rng) / math.log(cfg.delta))}")
    return err


def _uniforms(seed: int, episodes: int, T: int) -> np.ndarray:
    out = np.empty((episodes, T))
    for e in range(episodes):
        out[e] = signal_stream(seed, e).random(T)
    return out


def _stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error per column with compensated sums."""
    E = x.shape[0]
    mean = np.array([math.fsum(x[:, c]) / E for c in range(x.shape[1])])
    if E < 2:
        return mean, np.full(x.shape[1], np.nan)
    var = np.array([math.fsum((x[:, c] - mean[c]) ** 2) / (E - 1) for c in range(x.shape[1])])
    return mean, np.sqrt(var / E)


def _myopic_table(cfg: EquilibriumConfig, j: int, m: int | None) -> np.ndarray:
    grid = cfg.game.actions[j].grid(m)
    best = np.empty(cfg.n)
    for i in range(cfg.n):
        U = cfg.game.U(unilateral_profiles(cfg.frontier.a_tilde[i], j, grid))[:, j]
        best[i] = grid[int(np.argmax(U))]
    return best


def _play(cfg: EquilibriumConfig, episodes: int, T: int, seed: int,
          policy: DeviationPolicy | None, m: int | None):
    game = cfg.game
    V = np.tile(cfg.v0, (episodes, 1))
    total = np.zeros((episodes, cfg.n))
    uniforms = _uniforms(seed, episodes, T)
    trace = np.empty((episodes, 2 * T), dtype=np.int8)
    rb_tilde = cfg.stats.rho_bad_tilde
    myopic = _myopic_table(cfg, policy.deviator, m) if policy and policy.mode == "myopic" else None
    expected_bad = 0.0
    rows = np.arange(episodes)
    bad_label = np.asarray(game.bad)
    weight = 1.0 - cfg.delta
    for t in range(T):
        active, _, _, _ = _advance(cfg, V)
        prof = cfg.frontier.a_tilde[active].copy()
        if policy is not None and policy.mode != "comply":
            j = policy.deviator
            if policy.mode == "stationary" or (policy.mode == "one-shot" and t == 0):
                prof[:, j] = policy.action
            elif policy.mode == "myopic":
                prof[:, j] = myopic[active]
        U = game.U(prof)
        if policy is None or policy.mode == "comply":
            rb = rb_tilde[active]
        else:
            rb = game.rho(prof)[rows, bad_label[active]]
        good = uniforms[:, t] >= rb
        total += weight * U
        weight *= cfg.delta
        expected_bad += float(rb.sum())
        _, _, V = _advance(cfg, V, good)
        _check_floor(cfg, V)
        trace[:, 2 * t] = active
        trace[:, 2 * t + 1] = ~good
    digests = [hashlib.sha256(row.tobytes()).hexdigest()[:16] for row in trace]
    bad_rate = float(trace[:, 1::2].mean())
    return total, digests, bad_rate, expected_bad / (episodes * T)


def simulate(cfg: EquilibriumConfig, episodes: int, T: int, seed: int,
             eps_trunc: float | None = None) -> SimulationResult:
    """Discounted average payoffs of compliant play over ``episodes`` runs."""
    if episodes < 1 or T < 1:
        raise ValueError("need at least one episode and one period")
    check_truncation(cfg, T, eps_trunc)
    total, digests, bad, exp_bad = _play(cfg, episodes, T, seed, None, None)
    mean, se = _stats(total)
    return SimulationResult(mean, se, total, digests, bad, exp_bad, seed, T)


def deviation_value(cfg: EquilibriumConfig, policy: DeviationPolicy, episodes: int, T: int,
                    seed: int, eps_trunc: float | None = None, m: int | None = None):
    """Deviator's estimated discounted payoff and its standard error.

    The compliant players follow the engine, which reacts to public signals
    only, so the continuation path is driven by the signals the deviation
    induces.
    """
    if not 0 <= policy.deviator < cfg.n:
        raise ValueError(f"deviator {policy.deviator} out of range")
    check_truncation(cfg, T, eps_trunc)
    total, _, _, _ = _play(cfg, episodes, T, seed, policy, m)
    mean, se = _stats(total)
    j = policy.deviator
    return float(mean[j]), float(se[j])


def stationary_policies(cfg: EquilibriumConfig, j: int, points: int = 21) -> list[DeviationPolicy]:
    """Stationary overrides on the deviation grid (all actions of a finite
    space, ``points`` evenly spaced actions of an interval)."""
    space = cfg.game.actions[j]
    grid = space.grid() if space.is_finite else space.grid(points)
    return [DeviationPolicy(j, "stationary", float(a)) for a in grid]
