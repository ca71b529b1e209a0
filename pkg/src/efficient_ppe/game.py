"""Reduced-form stage games, preferred profiles and the efficient hyperplane.

A joint action profile is a float vector with one entry per player.  Finite
action spaces are encoded by the integer index of the action label; interval
spaces use the action value itself.  All game callables are vectorised over
a leading axis of profiles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    EmptyActionSpace,
    NonPositiveWeight,
    NonUniqueArgmax,
    NotBinarySignal,
    SingularFrontier,
)

DEFAULT_GRID = 1001
JOINT_BUDGET = 2_000_000
ARGMAX_TOL = 1e-9
HYPERPLANE_MARGIN = 1e-12
STRICT_TOL = 1e-12
DET_TOL = 1e-12


@dataclass(frozen=True)
class ActionSpace:
    """Either an ordered list of labelled actions or a closed interval.

    Interval spaces carry a grid resolution ``m`` used whenever a sup or inf
    over the space has to be evaluated numerically.
    """

    kind: str
    labels: tuple[str, ...] = ()
    lower: float = 0.0
    upper: float = 1.0
    m: int = DEFAULT_GRID

    def __post_init__(self):
        if self.kind == "finite":
            if not self.labels:
                raise EmptyActionSpace("finite action space needs at least one label")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError(f"duplicate action labels {self.labels}")
        elif self.kind == "interval":
            if not self.lower < self.upper:
                raise EmptyActionSpace(f"interval [{self.lower}, {self.upper}] is empty")
            if self.m < 2:
                raise ValueError("grid resolution must be at least 2")
        else:
            raise ValueError(f"unknown action space kind {self.kind!r}")

    @classmethod
    def finite(cls, labels) -> "ActionSpace":
        return cls("finite", labels=tuple(str(x) for x in labels))

    @classmethod
    def interval(cls, lower: float, upper: float, m: int = DEFAULT_GRID) -> "ActionSpace":
        return cls("interval", lower=float(lower), upper=float(upper), m=int(m))

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def grid(self, m: int | None = None) -> np.ndarray:
        if self.is_finite:
            return np.arange(len(self.labels), dtype=float)
        return np.linspace(self.lower, self.upper, int(m or self.m))

    def step(self, m: int | None = None) -> float:
        if self.is_finite:
            return 0.0
        return (self.upper - self.lower) / (int(m or self.m) - 1)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def describe(self, value: float) -> str:
        if self.is_finite:
            return self.labels[int(round(value))]
        return f"{value:.12g}"

    def with_grid(self, m: int) -> "ActionSpace":
        return self if self.is_finite else replace(self, m=int(m))


@dataclass(frozen=True, eq=False)
class ReducedGame:
    """Players, actions, expected utilities and the public signal distribution.

    ``payoff_fn`` maps a ``(k, n)`` array of profiles to ``(k, n)`` utilities;
    ``signal_fn`` maps it to ``(k, len(signals))`` probabilities.  For a
    two-signal game ``bad[i]`` is the index of the signal that counts as bad
    when player ``i`` is active.
    """

    actions: tuple[ActionSpace, ...]
    payoff_fn: Callable[[np.ndarray], np.ndarray]
    signal_fn: Callable[[np.ndarray], np.ndarray]
    signals: tuple[str, ...] = ("y_g", "y_b")
    bad: tuple[int, ...] | None = None
    name: str = "game"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.actions) < 2:
            raise ValueError("a game needs at least two players")
        if len(self.signals) < 2:
            raise ValueError("a game needs at least two signals")
        if self.bad is not None:
            if len(self.bad) != len(self.actions):
                raise ValueError("one bad-signal label per player is required")
            if any(b not in range(len(self.signals)) for b in self.bad):
                raise ValueError(f"bad-signal labels {self.bad} out of range")
        if len(self.signals) == 2 and self.bad is None:
            object.__setattr__(self, "bad", (1,) * len(self.actions))

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def is_binary(self) -> bool:
        return len(self.signals) == 2

    def U(self, profiles) -> np.ndarray:
        a = np.atleast_2d(np.asarray(profiles, dtype=float))
        return np.asarray(self.payoff_fn(a), dtype=float).reshape(a.shape[0], self.n)

    def rho(self, profiles) -> np.ndarray:
        a = np.atleast_2d(np.asarray(profiles, dtype=float))
        out = np.asarray(self.signal_fn(a), dtype=float)
        return out.reshape(a.shape[0], len(self.signals))

    def require_binary(self) -> None:
        if not self.is_binary:
            raise NotBinarySignal(
                f"{self.name} has {len(self.signals)} signals; coarsen it to two first"
            )

    def rho_bad(self, i: int, profiles) -> np.ndarray:
        """Probability of the signal that is bad when ``i`` is active."""
        self.require_binary()
        return self.rho(profiles)[:, self.bad[i]]

    def good_index(self, i: int) -> int:
        self.require_binary()
        return 1 - self.bad[i]

    def describe_profile(self, profile) -> str:
        return "(" + ",".join(sp.describe(x) for sp, x in zip(self.actions, profile)) + ")"

    def with_grid(self, m: int) -> "ReducedGame":
        return replace(self, actions=tuple(sp.with_grid(m) for sp in self.actions))


@dataclass(frozen=True, eq=False)
class EfficientFrontier:
    """Preferred profiles (rows of ``a_tilde``), their payoffs and the weights."""

    a_tilde: np.ndarray
    v_tilde: np.ndarray
    lam: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.v_tilde.shape[0]

    def own_payoffs(self) -> np.ndarray:
        """``v_tilde[i, i]`` for every player."""
        return np.diag(self.v_tilde).copy()


def _grid_sizes(game: ReducedGame, m: int | None, budget: int) -> list[int]:
    sizes = [len(sp.labels) if sp.is_finite else int(m or sp.m) for sp in game.actions]
    n_int = sum(not sp.is_finite for sp in game.actions)
    if n_int and int(np.prod(sizes, dtype=float)) > budget:
        fixed = int(np.prod([s for s, sp in zip(sizes, game.actions) if sp.is_finite]))
        cap = max(2, int((budget / max(fixed, 1)) ** (1.0 / n_int)))
        sizes = [s if sp.is_finite else min(s, cap) for s, sp in zip(sizes, game.actions)]
    return sizes


def joint_grid(game: ReducedGame, m: int | None = None, budget: int = JOINT_BUDGET) -> np.ndarray:
    """All joint profiles of the per-player grids, capped at ``budget`` points.

    When the full product would exceed the budget the interval coordinates
    are coarsened uniformly.
    """
    sizes = _grid_sizes(game, m, budget)
    axes = [sp.grid(s) for sp, s in zip(game.actions, sizes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def unilateral_profiles(base: np.ndarray, j: int, values: np.ndarray) -> np.ndarray:
    """Copies of ``base`` with player ``j``'s coordinate replaced by ``values``."""
    prof = np.repeat(np.asarray(base, dtype=float)[None, :], len(values), axis=0)
    prof[:, j] = values
    return prof


def _refine_coordinate(fn, x0: float, f0: float, lo: float, hi: float):
    """Bounded scalar maximisation of ``fn`` on ``[lo, hi]``; keeps the incumbent
    unless the refined point is strictly better."""
    if hi <= lo:
        return x0, f0
    res = minimize_scalar(lambda x: -fn(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, hi - lo)})
    fx = -res.fun
    if np.isfinite(fx) and fx > f0:
        return float(res.x), float(fx)
    return x0, f0


def preferred_profiles(game: ReducedGame, m: int | None = None, tol: float = ARGMAX_TOL,
                       refine: bool = True, budget: int = JOINT_BUDGET) -> EfficientFrontier:
    """Locate each player's unique utility-maximising joint profile.

    Interval coordinates are searched on a grid and then polished by one
    bounded scalar search per coordinate around the incumbent.  Grid points
    adjacent to the incumbent are ignored in the uniqueness test because a
    continuous maximiser is always approached by its grid neighbours.
    """
    for sp in game.actions:
        if sp.is_finite and not sp.labels:
            raise EmptyActionSpace("empty action space")
    sizes = _grid_sizes(game, m, budget)
    P = joint_grid(game, m, budget)
    utils = game.U(P)
    steps = np.array([0.0 if sp.is_finite else sp.step(s) for sp, s in zip(game.actions, sizes)])

    n = game.n
    a_tilde = np.empty((n, n))
    for i in range(n):
        k = int(np.argmax(utils[:, i]))
        best = utils[k, i]
        near = np.all(np.abs(P - P[k]) <= steps * (1 + 1e-9) + 1e-15, axis=1)
        others = utils[~near, i]
        if others.size and best - others.max() <= tol:
            rival = P[~near][int(np.argmax(others))]
            raise NonUniqueArgmax(
                f"player {i + 1}'s utility is maximised at both "
                f"{game.describe_profile(P[k])} and {game.describe_profile(rival)}"
            )
        a = P[k].copy()
        if refine:
            for _ in range(3):
                for d, sp in enumerate(game.actions):
                    if sp.is_finite:
                        continue
                    lo = max(sp.lower, a[d] - steps[d])
                    hi = min(sp.upper, a[d] + steps[d])

                    def f(x, d=d):
                        trial = a.copy()
                        trial[d] = x
                        return game.U(trial)[0, i]

                    a[d], best = _refine_coordinate(f, a[d], best, lo, hi)
        a_tilde[i] = a
    v_tilde = game.U(a_tilde)
    return EfficientFrontier(a_tilde=a_tilde, v_tilde=v_tilde)


def hyperplane_weights(frontier: EfficientFrontier) -> np.ndarray:
    """Solve ``lam . v_tilde[i] = 1`` for every ``i``."""
    V = np.asarray(frontier.v_tilde, dtype=float)
    det = np.linalg.det(V)
    if abs(det) <= DET_TOL:
        raise SingularFrontier(f"preferred payoff vectors are linearly dependent (det={det:.3g})")
    lam = np.linalg.solve(V, np.ones(V.shape[0]))
    if np.any(lam <= 0):
        raise NonPositiveWeight(f"hyperplane weights {lam} are not all positive")
    return lam


def efficient_frontier(game: ReducedGame, m: int | None = None, **kw) -> EfficientFrontier:
    fr = preferred_profiles(game, m, **kw)
    return replace(fr, lam=hyperplane_weights(fr))


# --------------------------------------------------------------------------
# Assumption checks


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str
    witness: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    checks: list[AssumptionCheck]
    frontier: EfficientFrontier | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{c.name}: {'PASS' if c.passed else 'FAIL'}  {c.detail}" for c in self.checks]


def _is_preferred(P: np.ndarray, a_tilde: np.ndarray) -> np.ndarray:
    hit = np.zeros(len(P), dtype=bool)
    for a in a_tilde:
        hit |= np.all(np.abs(P - a) <= 1e-12, axis=1)
    return hit


def validate_assumptions(game: ReducedGame, m: int | None = None,
                         strict_support: bool = False,
                         budget: int = JOINT_BUDGET) -> ValidationReport:
    """Check the four standing assumptions on grids; failures carry witnesses.

    Full support is required strictly at every preferred profile.  Without
    ``strict_support`` unilateral deviations only need valid probabilities;
    with it every joint grid profile must have both signals with positive
    probability.
    """
    checks: list[AssumptionCheck] = []
    try:
        fr = preferred_profiles(game, m, budget=budget)
    except NonUniqueArgmax as exc:
        checks.append(AssumptionCheck("profiles", False, str(exc)))
        for name in ("A1", "A2", "A3", "A4"):
            checks.append(AssumptionCheck(name, False, "preferred profiles undefined"))
        return ValidationReport(checks)
    checks.append(AssumptionCheck(
        "profiles", True,
        "preferred profiles " + " ".join(game.describe_profile(a) for a in fr.a_tilde)))

    det = float(np.linalg.det(fr.v_tilde))
    a1 = abs(det) > DET_TOL
    checks.append(AssumptionCheck("A1", a1, f"det={det:.6g}", {"determinant": det}))

    lam = None
    if a1:
        lam = np.linalg.solve(fr.v_tilde, np.ones(game.n))
    if lam is None:
        checks.append(AssumptionCheck("A2", False, "no hyperplane (A1 fails)"))
    elif np.any(lam <= 0):
        checks.append(AssumptionCheck("A2", False, f"non-positive weights {lam}", {"lambda": lam}))
    else:
        P = joint_grid(game, m, budget)
        mask = ~_is_preferred(P, fr.a_tilde)
        welfare = game.U(P[mask]) @ lam
        if welfare.size:
            k = int(np.argmax(welfare))
            worst, prof = float(welfare[k]), P[mask][k]
        else:
            worst, prof = -np.inf, None
        ok = worst < 1 - HYPERPLANE_MARGIN
        desc = game.describe_profile(prof) if prof is not None else "-"
        checks.append(AssumptionCheck(
            "A2", ok, f"lambda={np.array2string(lam, precision=6)} max welfare off-frontier "
            f"{worst:.12g} at {desc}", {"lambda": lam, "worst": worst, "profile": prof}))
        fr = replace(fr, lam=lam)

    if not game.is_binary:
        checks.append(AssumptionCheck("A3", False, f"{len(game.signals)} signals, need 2"))
        checks.append(AssumptionCheck("A4", False, "labeling needs two signals"))
        return ValidationReport(checks, fr)

    on_path = game.rho(fr.a_tilde)
    dev_probs = []
    for i in range(game.n):
        for j in range(game.n):
            grid = game.actions[j].grid(m)
            dev_probs.append(game.rho(unilateral_profiles(fr.a_tilde[i], j, grid)))
    dev_probs = np.concatenate(dev_probs)
    ok = bool(np.all(on_path > 0) and np.all(on_path < 1))
    ok &= bool(np.all(dev_probs >= 0) and np.all(dev_probs <= 1))
    lo, hi = float(min(on_path.min(), dev_probs.min())), float(max(on_path.max(), dev_probs.max()))
    detail = f"on-path signal probabilities in [{on_path.min():.6g}, {on_path.max():.6g}]"
    if strict_support:
        P = joint_grid(game, m, budget)
        allp = game.rho(P)
        ok &= bool(np.all(allp > 0) and np.all(allp < 1))
        lo, hi = float(allp.min()), float(allp.max())
        detail += f"; all grid profiles in [{lo:.6g}, {hi:.6g}]"
    checks.append(AssumptionCheck("A3", ok, detail, {"min": lo, "max": hi}))

    failures = []
    for i in range(game.n):
        base_bad = game.rho_bad(i, fr.a_tilde[i])[0]
        for j in range(game.n):
            if j == i:
                continue
            grid = game.actions[j].grid(m)
            prof = unilateral_profiles(fr.a_tilde[i], j, grid)
            gain = game.U(prof)[:, j] - fr.v_tilde[i, j]
            dbad = game.rho_bad(i, prof) - base_bad
            profitable = gain > STRICT_TOL
            if not profitable.any():
                failures.append((i, j, None, "no profitable deviation"))
                continue
            bad_dev = profitable & (dbad <= STRICT_TOL)
            if bad_dev.any():
                k = int(np.flatnonzero(bad_dev)[np.argmin(dbad[bad_dev])])
                failures.append((i, j, game.actions[j].describe(grid[k]),
                                 f"profitable deviation changes bad-signal probability by {dbad[k]:.6g}"))
    if failures:
        i, j, act, why = failures[0]
        act_s = "-" if act is None else act
        detail = f"witness i={i + 1} j={j + 1} a_j={act_s}: {why}"
        if len(failures) > 1:
            detail += f" (+{len(failures) - 1} more)"
        checks.append(AssumptionCheck("A4", False, detail,
                                      {"i": i, "j": j, "action": act, "all": failures}))
    else:
        checks.append(AssumptionCheck("A4", True, "every profitable deviation raises the bad signal"))
    return ValidationReport(checks, fr)


def product_profiles(game: ReducedGame) -> list[tuple[int, ...]]:
    """Index tuples of every profile of a finite game."""
    return list(itertools.product(*(range(len(sp.labels)) for sp in game.actions)))
