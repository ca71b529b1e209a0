"""Designer-side elaborated form and the example game builders.

The elaborated form separates the outcome model (``pi``, realized utility),
the measurement device ``phi`` and the announcement rule ``psi``.  Composing
the three gives a reduced game whose signal distribution is
``rho = pi @ phi @ psi`` and whose expected utility averages realized utility
over outcomes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DegenerateCell, DimensionMismatch, ParameterConstraintViolated
from .game import DEFAULT_GRID, ActionSpace, ReducedGame, joint_grid

ROW_TOL = 1e-9


def _check_stochastic(mat: np.ndarray, what: str) -> None:
    if np.any(mat < -ROW_TOL) or np.any(np.abs(mat.sum(axis=-1) - 1) > ROW_TOL):
        raise ValueError(f"rows of {what} must be probability distributions")


@dataclass(frozen=True, eq=False)
class OutcomeModel:
    """Actions, outcome labels, outcome distribution and realized utility.

    ``pi`` maps ``(k, n)`` profiles to ``(k, |Z|)`` outcome probabilities and
    ``u_raw`` maps them to ``(k, n, |Z|)`` realized utilities, where entry
    ``[., i, z]`` may depend only on ``a_i`` and ``z``.
    """

    actions: tuple[ActionSpace, ...]
    outcomes: tuple[str, ...]
    pi: Callable[[np.ndarray], np.ndarray]
    u_raw: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class MeasurementDevice:
    """Finite measurement set ``X`` and row-stochastic ``phi[z, x]``."""

    X: tuple[str, ...]
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[1] != len(self.X):
            raise DimensionMismatch(f"phi has shape {phi.shape}, expected (|Z|, {len(self.X)})")
        _check_stochastic(phi, "phi")
        object.__setattr__(self, "phi", phi)

    @classmethod
    def identity(cls, labels: Sequence[str]) -> "MeasurementDevice":
        return cls(tuple(labels), np.eye(len(labels)))


@dataclass(frozen=True, eq=False)
class AnnouncementRule:
    """Finite signal set ``Y`` and row-stochastic ``psi[x, y]``."""

    Y: tuple[str, ...]
    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if psi.ndim != 2 or psi.shape[1] != len(self.Y):
            raise DimensionMismatch(f"psi has shape {psi.shape}, expected (|X|, {len(self.Y)})")
        _check_stochastic(psi, "psi")
        object.__setattr__(self, "psi", psi)

    @classmethod
    def identity(cls, labels: Sequence[str]) -> "AnnouncementRule":
        return cls(tuple(labels), np.eye(len(labels)))

    @classmethod
    def deterministic(cls, X: Sequence[str], Y: Sequence[str], mapping: Mapping[str, str]):
        psi = np.zeros((len(X), len(Y)))
        for k, x in enumerate(X):
            psi[k, list(Y).index(mapping[x])] = 1.0
        return cls(tuple(Y), psi)


def reduce(outcome: OutcomeModel, device: MeasurementDevice, rule: AnnouncementRule,
           bad: Sequence[int] | None = None, name: str = "elaborated",
           params: Mapping[str, float] | None = None) -> ReducedGame:
    """Compose an elaborated form into a reduced game."""
    nz = len(outcome.outcomes)
    if device.phi.shape[0] != nz:
        raise DimensionMismatch(f"phi has {device.phi.shape[0]} rows for {nz} outcomes")
    if rule.psi.shape[0] != len(device.X):
        raise DimensionMismatch(
            f"psi has {rule.psi.shape[0]} rows for {len(device.X)} measurements")
    channel = device.phi @ rule.psi

    def payoff(a):
        probs = np.asarray(outcome.pi(a), dtype=float)
        return np.einsum("knz,kz->kn", np.asarray(outcome.u_raw(a), dtype=float), probs)

    def signal(a):
        return np.asarray(outcome.pi(a), dtype=float) @ channel

    if bad is not None:
        bad = tuple(int(b) for b in bad)
    return ReducedGame(actions=tuple(outcome.actions), payoff_fn=payoff, signal_fn=signal,
                       signals=tuple(rule.Y), bad=bad, name=name, params=dict(params or {}))


def coarsen(game: ReducedGame, partition: Sequence[Sequence[str]], bad: int | Sequence[int] = 1,
            m: int = 101) -> ReducedGame:
    """Merge the signals of ``game`` into two cells.

    ``partition`` lists the member signal labels of cell 0 and cell 1, and
    ``bad`` names the bad cell for every active player (one index or one per
    player).  A cell that is empty, or whose probability is identically 0 or
    1 on the joint grid, is rejected.
    """
    if len(partition) != 2:
        raise DegenerateCell(f"need exactly two cells, got {len(partition)}")
    cells = [tuple(c) for c in partition]
    for c in cells:
        if not c:
            raise DegenerateCell("partition has an empty cell")
    members = [y for c in cells for y in c]
    if sorted(members) != sorted(game.signals) or len(set(members)) != len(members):
        raise DegenerateCell(f"cells {cells} do not partition {game.signals}")
    S = np.zeros((len(game.signals), 2))
    for k, c in enumerate(cells):
        for y in c:
            S[game.signals.index(y), k] = 1.0
    if np.isscalar(bad):
        bad = (int(bad),) * game.n
    labels = tuple("{" + ",".join(c) + "}" for c in cells)

    def signal(a):
        return game.rho(a) @ S

    out = ReducedGame(actions=game.actions, payoff_fn=game.payoff_fn, signal_fn=signal,
                      signals=labels, bad=tuple(bad), name=game.name + "-coarse",
                      params=dict(game.params))
    probs = out.rho(joint_grid(out, m, budget=20_000))[:, 0]
    if np.all(probs <= 0) or np.all(probs >= 1):
        raise DegenerateCell(f"cell {labels[0]} has constant probability {probs[0]:g}")
    return out


# --------------------------------------------------------------------------
# Finite table games


def table_game(labels: Sequence[Sequence[str]], payoffs: np.ndarray, probs: np.ndarray,
               signals: Sequence[str] = ("y_g", "y_b"), bad: Sequence[int] | None = None,
               name: str = "table", params: Mapping[str, float] | None = None) -> ReducedGame:
    """Reduced game given by a payoff tensor ``(|A_1|, ..., |A_n|, n)`` and a
    signal tensor ``(|A_1|, ..., |A_n|, |Y|)``."""
    shape = tuple(len(x) for x in labels)
    payoffs = np.asarray(payoffs, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if payoffs.shape != shape + (len(shape),):
        raise DimensionMismatch(f"payoff table has shape {payoffs.shape}, expected {shape + (len(shape),)}")
    if probs.shape != shape + (len(signals),):
        raise DimensionMismatch(f"signal table has shape {probs.shape}, expected {shape + (len(signals),)}")
    _check_stochastic(probs, "signal table")
    actions = tuple(ActionSpace.finite(x) for x in labels)

    def lookup(table):
        def fn(a):
            idx = np.rint(a).astype(int)
            return table[tuple(idx.T)]
        return fn

    return ReducedGame(actions=actions, payoff_fn=lookup(payoffs), signal_fn=lookup(probs),
                       signals=tuple(signals), bad=None if bad is None else tuple(bad),
                       name=name, params=dict(params or {}))


def custom_matrix(labels: Sequence[Sequence[str]], payoffs: Mapping[tuple, Sequence[float]],
                  prob_second: Mapping[tuple, float], signals: Sequence[str] = ("y_g", "y_b"),
                  bad: Sequence[int] | None = None, name: str = "custom") -> ReducedGame:
    """Two-signal finite game from per-profile payoff rows.

    Keys are tuples of action labels.  ``prob_second[a]`` is the probability
    of ``signals[1]``; every profile needs one.  Profiles absent from
    ``payoffs`` get zero utility for every player.
    """
    shape = tuple(len(x) for x in labels)
    n = len(shape)
    U = np.zeros(shape + (n,))
    P = np.zeros(shape + (2,))
    for key, row in payoffs.items():
        idx = _profile_index(labels, key)
        if len(row) != n:
            raise DimensionMismatch(f"payoff row for {key} has {len(row)} entries, expected {n}")
        U[idx] = row
    for prof in itertools.product(*labels):
        if prof not in prob_second:
            raise DimensionMismatch(f"missing signal probability for profile {prof}")
        pb = float(prob_second[prof])
        P[_profile_index(labels, prof)] = (1 - pb, pb)
    return table_game(labels, U, P, signals, bad, name)


def _profile_index(labels, key) -> tuple[int, ...]:
    if len(key) != len(labels):
        raise DimensionMismatch(f"profile {key} has wrong length")
    try:
        return tuple(list(lab).index(k) for lab, k in zip(labels, key))
    except ValueError as exc:
        raise DimensionMismatch(f"unknown action in profile {key}") from exc


# --------------------------------------------------------------------------
# Modified prisoners' dilemma


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ParameterConstraintViolated(message)


def modified_pd_elaborated(B=4.0, b=1.0, c=1.5, p=0.9, q=0.8, r=0.2):
    """The prisoners' dilemma as an elaborated form with ``Z = Y``.

    Realized utility is taken equal to the expected payoff of the profile so
    that composition reproduces the payoff table exactly.
    """
    table = np.array([[[c, c], [0.0, B]], [[B, 0.0], [b, b]]])
    good = np.array([[p, q], [q, r]])
    Z = ("y_g", "y_b")
    actions = (ActionSpace.finite("CD"), ActionSpace.finite("CD"))

    def pi(a):
        idx = np.rint(a).astype(int)
        g = good[idx[:, 0], idx[:, 1]]
        return np.stack([g, 1 - g], axis=1)

    def u_raw(a):
        idx = np.rint(a).astype(int)
        row = table[idx[:, 0], idx[:, 1]]
        return np.repeat(row[:, :, None], 2, axis=2)

    return (OutcomeModel(actions, Z, pi, u_raw), MeasurementDevice.identity(Z),
            AnnouncementRule.identity(Z))


def make_modified_pd(B=4.0, b=1.0, c=1.5, p=0.9, q=0.8, r=0.2,
                     enforce_constraints: bool = True) -> ReducedGame:
    """Two-player, two-action game with payoffs ``(c,c), (0,B), (B,0), (b,b)``.

    ``y_g`` is good for both players and has probability ``p`` at (C,C),
    ``q`` after a single D and ``r`` at (D,D).
    """
    if enforce_constraints:
        _require(B > 2 * c > 2 * b > 0, f"need B > 2c > 2b > 0, got B={B}, b={b}, c={c}")
        _require(1 > p >= q > r > 0, f"need 1 > p >= q > r > 0, got p={p}, q={q}, r={r}")
    params = dict(B=B, b=b, c=c, p=p, q=q, r=r)
    return reduce(*modified_pd_elaborated(B, b, c, p, q, r), bad=(1, 1),
                  name="modified_pd", params=params)


# --------------------------------------------------------------------------
# Repeated contest


def _win_probs(a: np.ndarray, eta: float, kappa: float) -> np.ndarray:
    total = a.sum(axis=1, keepdims=True)
    return a * np.maximum(eta - kappa * (total - a), 0.0)


def contest_elaborated(n=2, R=1.0, eta=0.8, kappa=0.55, c=0.2, rule=1, m=DEFAULT_GRID):
    """Outcomes ``z_0`` (nobody wins) and ``z_k`` (player k wins); the designer
    observes the winner.  Rule 1 announces only whether someone won, rule 2
    announces the winner."""
    Z = tuple(f"z{k}" for k in range(n + 1))
    actions = tuple(ActionSpace.interval(0.0, 1.0, m) for _ in range(n))

    def pi(a):
        w = _win_probs(a, eta, kappa)
        return np.concatenate([1 - w.sum(axis=1, keepdims=True), w], axis=1)

    def u_raw(a):
        k = a.shape[0]
        out = np.repeat((-c * a)[:, :, None], n + 1, axis=2)
        out[:, np.arange(n), np.arange(1, n + 1)] += R
        return out.reshape(k, n, n + 1)

    device = MeasurementDevice.identity(Z)
    if rule == 1:
        mapping = {z: ("y_b" if z == "z0" else "y_g") for z in Z}
        announce = AnnouncementRule.deterministic(Z, ("y_g", "y_b"), mapping)
    elif rule == 2:
        announce = AnnouncementRule.identity(Z)
    else:
        raise ValueError(f"rule must be 1 or 2, got {rule}")
    return OutcomeModel(actions, Z, pi, u_raw), device, announce


def make_contest(n=2, R=1.0, eta=0.8, kappa=0.55, c=0.2, rule=1, m=DEFAULT_GRID,
                 enforce_constraints: bool = True) -> ReducedGame:
    """Repeated contest with effort ``a_i`` in [0, 1].

    ``U_i = a_i (eta - kappa sum_{j != i} a_j)^+ R - c a_i``.  Rule 1 yields a
    two-signal game (``y_b`` = nobody won); rule 2 keeps all ``n + 1``
    outcomes as signals and has to be coarsened before equilibrium analysis.
    """
    if enforce_constraints:
        _require(n >= 2, f"need n >= 2, got {n}")
        _require(R > 0 and c > 0, f"need R > 0 and c > 0, got R={R}, c={c}")
        _require(0 < eta < 1 and 0 < kappa < 1, f"need eta, kappa in (0,1), got {eta}, {kappa}")
        _require(R * eta > c, f"need R*eta > c, got {R * eta} <= {c}")
        _require(kappa > 0.5 * (eta - c / R),
                 f"need kappa > (eta - c/R)/2 = {0.5 * (eta - c / R):.6g}, got {kappa}")
    params = dict(n=n, R=R, eta=eta, kappa=kappa, c=c, rule=rule)
    elab = contest_elaborated(n, R, eta, kappa, c, rule, m)
    bad = (1,) * n if rule == 1 else None
    return reduce(*elab, bad=bad, name=f"contest_rule{rule}", params=params)


# --------------------------------------------------------------------------
# Resource sharing through an M/M/1 server


def make_mm1(n=3, chi=1.0, eps=0.3, p=1.0, d0=2.0, m=DEFAULT_GRID,
             enforce_constraints: bool = True) -> ReducedGame:
    """Resource sharing through a server with capacity ``chi - e``, where the
    shock ``e`` is uniform on ``[0, eps]``.

    The designer reports ``y_l`` when measured delay is below ``d0``; ``y_l``
    is good for every player.
    """
    if enforce_constraints:
        _require(n >= 2, f"need n >= 2, got {n}")
        _require(chi > 0 and eps > 0 and p > 0, "need chi, eps, p > 0")
        _require(eps <= 2 * chi / (2 + p), f"need eps <= 2 chi/(2+p) = {2 * chi / (2 + p):.6g}")
        _require(d0 > 0, f"need d0 > 0, got {d0}")
    actions = tuple(ActionSpace.interval(0.0, chi, m) for _ in range(n))

    def payoff(a):
        s = a.sum(axis=1, keepdims=True)
        low = chi - eps / 2 - s
        high = (chi - s) ** 2 / (2 * eps)
        scale = np.where(s <= chi - eps, low, np.where(s < chi, high, 0.0))
        return np.power(a, p) * scale

    def signal(a):
        s = a.sum(axis=1)
        g = np.clip(chi - s - 1.0 / d0, 0.0, eps) / eps
        return np.stack([g, 1 - g], axis=1)

    params = dict(n=n, chi=chi, eps=eps, p=p, d0=d0)
    return ReducedGame(actions=actions, payoff_fn=payoff, signal_fn=signal,
                       signals=("y_l", "y_h"), bad=(1,) * n, name="mm1_sharing", params=params)


# --------------------------------------------------------------------------
# Three-player game with no regular self-generating set

TABLE3_PAYOFFS = {
    ("l", "h", "l"): (0.0, 1.0, 0.5),
    ("m", "h", "l"): (0.1, 0.0, 0.0),
    ("h", "l", "l"): (1.0, 0.5, 0.0),
    ("h", "m", "l"): (0.0, 0.55, 0.0),
    ("h", "h", "l"): (0.2, 0.6, 0.0),
    ("l", "h", "m"): (0.0, 0.0, 0.55),
    ("h", "l", "m"): (0.0, 0.0, 0.1),
    ("l", "l", "h"): (0.5, 0.0, 1.0),
    ("l", "m", "h"): (0.0, 0.1, 0.0),
    ("l", "h", "h"): (0.0, 0.2, 0.6),
    ("m", "l", "h"): (0.55, 0.0, 0.0),
    ("h", "l", "h"): (0.6, 0.0, 0.2),
}


def make_table3(star: float = 0.0) -> ReducedGame:
    """3x3x3 game whose irrelevant entries are all ``star``.

    The good signal has probability 2/3 at permutations of (h,l,l), 1/2 at
    permutations of (h,m,l) and 1/3 elsewhere.
    """
    labels = [("l", "m", "h")] * 3
    payoffs = {}
    for prof in itertools.product(*labels):
        row = TABLE3_PAYOFFS.get(prof)
        if row is None:
            payoffs[prof] = (star,) * 3
        else:
            # zeros in the stored rows stand for the irrelevant entries
            payoffs[prof] = tuple(star if (x == 0.0 and not _is_set(prof, k)) else x
                                  for k, x in enumerate(row))
    prob_bad = {}
    for prof in itertools.product(*labels):
        s = sorted(prof)
        if s == ["h", "l", "l"]:
            g = 2 / 3
        elif s == ["h", "l", "m"]:
            g = 1 / 2
        else:
            g = 1 / 3
        prob_bad[prof] = 1 - g
    return custom_matrix(labels, payoffs, prob_bad, name="table3")


_TABLE3_SET = {
    ("l", "h", "l"): (0, 1, 2), ("h", "l", "l"): (0, 1, 2), ("l", "l", "h"): (0, 1, 2),
    ("m", "h", "l"): (0,), ("h", "m", "l"): (1,), ("h", "h", "l"): (0, 1),
    ("l", "h", "m"): (2,), ("h", "l", "m"): (2,), ("l", "m", "h"): (1,),
    ("l", "h", "h"): (1, 2), ("m", "l", "h"): (0,), ("h", "l", "h"): (0, 2),
}


def _is_set(prof, k) -> bool:
    return k in _TABLE3_SET.get(prof, ())


BUILDERS = {
    "modified_pd": make_modified_pd,
    "contest": make_contest,
    "mm1_sharing": make_mm1,
    "table3": make_table3,
}
