"""INI run configuration: game, analysis, simulation and sweep sections.

Example::

    [game]
    builder = modified_pd
    B = 4
    b = 1

    [analysis]
    delta = 0.8

For ``builder = custom_matrix`` the game section lists ``actions`` as
labels per player separated by ``|``, one ``payoff.<a1>.<a2>...`` row per
profile and one ``prob.<a1>.<a2>...`` entry giving the probability of the
second signal (``y_b`` unless ``signals`` renames them).

Keys are case sensitive.  Unknown sections or keys are rejected with the
line number where they appear.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elaborated import custom_matrix, make_contest, make_modified_pd, make_mm1, make_table3
from .errors import ConfigError, UnknownSweepParameter
from .game import ReducedGame

BUILDER_KEYS = {
    "modified_pd": {"B": float, "b": float, "c": float, "p": float, "q": float, "r": float},
    "contest": {"n": int, "R": float, "eta": float, "kappa": float, "c": float, "rule": int},
    "mm1_sharing": {"n": int, "chi": float, "eps": float, "p": float, "d0": float},
    "table3": {"star": float},
    "custom_matrix": {"actions": str, "signals": str, "bad": str},
}
SECTION_KEYS = {
    "analysis": {"mu": "vector", "delta": float, "grid": int, "v0": "vector",
                 "oracle_grid": int, "horizon": int, "seed": int},
    "simulation": {"episodes": int, "horizon": int, "seed": int, "deviations": str,
                   "eps_trunc": float, "deviation_points": int},
    "sweep": {"parameter": str, "start": float, "stop": float, "steps": int},
}
SWEEP_PARAMETERS = {"d0": ("mm1_sharing",), "kappa": ("contest",), "delta": None}


@dataclass
class RunConfig:
    builder: str
    params: dict
    custom: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    path: str = ""

    def build_game(self, m: int | None = None, enforce: bool = True, **override) -> ReducedGame:
        params = {**self.params, **override}
        if self.builder == "modified_pd":
            return make_modified_pd(**params, enforce_constraints=enforce)
        if self.builder == "contest":
            kw = {"m": m} if m else {}
            return make_contest(**params, **kw, enforce_constraints=enforce)
        if self.builder == "mm1_sharing":
            kw = {"m": m} if m else {}
            return make_mm1(**params, **kw, enforce_constraints=enforce)
        if self.builder == "table3":
            return make_table3(**params)
        return custom_matrix(**self.custom)

    @property
    def grid(self) -> int | None:
        return self.analysis.get("grid")


def _line_of(lines: list[str], section: str, key: str | None) -> int | None:
    current = None
    head = re.compile(r"^\s*\[([^\]]+)\]")
    for k, text in enumerate(lines, 1):
        mh = head.match(text)
        if mh:
            current = mh.group(1).strip()
            if key is None and current == section:
                return k
            continue
        if current == section and key is not None:
            mk = re.match(r"^\s*([^=:#;]+?)\s*[=:]", text)
            if mk and mk.group(1) == key:
                return k
    return None


def _parse_value(kind, raw: str):
    if kind == "vector":
        parts = [x for x in re.split(r"[,\s]+", raw.strip()) if x]
        return np.array([float(x) for x in parts])
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw.strip()


def load(path: str | Path) -> RunConfig:
    """Read and validate a configuration file; raises ConfigError."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads(text, str(path))


def loads(text: str, source: str = "<string>") -> RunConfig:
    lines = text.splitlines()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header", line=exc.lineno) from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse {exc.errors[0][1] if exc.errors else ''}",
                          line=lineno) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], line=exc.lineno) from exc

    for sec in cp.sections():
        if sec != "game" and sec not in SECTION_KEYS:
            raise ConfigError(f"unknown section [{sec}]", line=_line_of(lines, sec, None))
    if not cp.has_section("game"):
        raise ConfigError("missing [game] section")
    game = cp["game"]
    builder = game.get("builder")
    if builder is None:
        raise ConfigError("[game] needs a builder", line=_line_of(lines, "game", None))
    if builder not in BUILDER_KEYS:
        raise ConfigError(f"unknown builder {builder!r}; choose from {sorted(BUILDER_KEYS)}",
                          line=_line_of(lines, "game", "builder"))
    allowed = BUILDER_KEYS[builder]
    params, custom = {}, {}
    payoff_rows, prob_rows = {}, {}
    for key, raw in game.items():
        line = _line_of(lines, "game", key)
        if key == "builder":
            continue
        try:
            if builder == "custom_matrix" and key.startswith("payoff."):
                payoff_rows[tuple(key.split(".")[1:])] = _parse_value("vector", raw).tolist()
            elif builder == "custom_matrix" and key.startswith("prob."):
                prob_rows[tuple(key.split(".")[1:])] = float(raw)
            elif key in allowed:
                params[key] = _parse_value(allowed[key], raw)
            else:
                raise ConfigError(f"unknown key {key!r} for builder {builder}", line=line)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}", line=line) from exc
    if builder == "custom_matrix":
        custom = _custom(params, payoff_rows, prob_rows, lines)
        params = {}

    out = RunConfig(builder, params, custom, path=source)
    for sec, keys in SECTION_KEYS.items():
        if not cp.has_section(sec):
            continue
        vals = {}
        for key, raw in cp[sec].items():
            line = _line_of(lines, sec, key)
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", line=line)
            try:
                vals[key] = _parse_value(keys[key], raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}", line=line) from exc
        setattr(out, sec, vals)
    _check_ranges(out, lines)
    return out


def _custom(params, payoff_rows, prob_rows, lines) -> dict:
    if "actions" not in params:
        raise ConfigError("custom_matrix needs 'actions'", line=_line_of(lines, "game", None))
    labels = [tuple(p.split()) for p in params["actions"].split("|")]
    if len(labels) < 2 or any(not x for x in labels):
        raise ConfigError("actions must list at least two nonempty players separated by '|'",
                          line=_line_of(lines, "game", "actions"))
    signals = tuple(s.strip() for s in params.get("signals", "y_g, y_b").split(","))
    if len(signals) != 2:
        raise ConfigError("custom_matrix supports exactly two signals",
                          line=_line_of(lines, "game", "signals"))
    bad = None
    if "bad" in params:
        names = [s.strip() for s in params["bad"].split(",")]
        if len(names) != len(labels) or any(s not in signals for s in names):
            raise ConfigError("'bad' must name one of the signals for every player",
                              line=_line_of(lines, "game", "bad"))
        bad = tuple(signals.index(s) for s in names)
    return dict(labels=labels, payoffs=payoff_rows, prob_second=prob_rows, signals=signals,
                bad=bad)


def _check_ranges(cfg: RunConfig, lines) -> None:
    a = cfg.analysis
    if "delta" in a and not 0 < a["delta"] < 1:
        raise ConfigError("delta must lie in (0, 1)", line=_line_of(lines, "analysis", "delta"))
    if "grid" in a and a["grid"] < 2:
        raise ConfigError("grid must be at least 2", line=_line_of(lines, "analysis", "grid"))
    s = cfg.simulation
    for key in ("episodes", "horizon"):
        if key in s and s[key] < 1:
            raise ConfigError(f"{key} must be positive", line=_line_of(lines, "simulation", key))
    sw = cfg.sweep
    if sw:
        line = _line_of(lines, "sweep", "parameter")
        name = sw.get("parameter")
        if name not in SWEEP_PARAMETERS:
            raise UnknownSweepParameter(
                f"cannot sweep {name!r}; choose from {sorted(SWEEP_PARAMETERS)}", line=line)
        builders = SWEEP_PARAMETERS[name]
        if builders is not None and cfg.builder not in builders:
            raise UnknownSweepParameter(f"{name!r} sweeps need builder {builders[0]}", line=line)
        if name == "kappa" and int(cfg.params.get("rule", 1)) != 1:
            raise UnknownSweepParameter("kappa sweeps need contest rule 1", line=line)
        for key in ("start", "stop", "steps"):
            if key not in sw:
                raise ConfigError(f"[sweep] needs {key!r}", line=_line_of(lines, "sweep", None))
        if sw["steps"] < 1:
            raise ConfigError("steps must be positive", line=_line_of(lines, "sweep", "steps"))
