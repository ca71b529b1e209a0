"""Command line front end.

Exit codes: 0 when the requested check passes, 1 when the analysis finds a
violation or infeasibility, 2 for unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .deviation import (
    check_conditions,
    check_prop1,
    deviation_stats,
    min_discount,
    mu_min,
)
from .engine import EquilibriumConfig, run
from .errors import (
    ConfigError,
    DegenerateDenominator,
    InfeasibleMu,
    LabelingViolation,
    NonUniqueArgmax,
    ParameterConstraintViolated,
    PPEError,
    SingularFrontier,
    NonPositiveWeight,
    TruncationTooCoarse,
)
from .game import efficient_frontier, validate_assumptions
from .oracle import DecompositionOracle, is_self_generating, two_player
from .sim import DeviationPolicy, deviation_value, simulate, stationary_policies

ANALYSIS_COLUMNS = ["kind", "i", "j", "alpha", "alpha_witness", "beta", "beta_witness",
                    "lambda", "v_own", "mu", "mu_min", "prop1", "vhat", "name", "value"]
SWEEP_COLUMNS = ["value", "eta", "fraction", "delta_min", "feasible", "status",
                 "cond1", "cond2", "regular"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _vec(v) -> str:
    return ";".join(_fmt(float(x)) for x in v)


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(args, cfg) -> int | None:
    return args.grid or cfg.grid


# --------------------------------------------------------------------------
# validate


def cmd_validate(args, cfg) -> int:
    game = cfg.build_game(_grid(args, cfg), enforce=False)
    rep = validate_assumptions(game, _grid(args, cfg), strict_support=args.strict_support)
    print(f"game: {game.name}")
    for line in rep.lines():
        print(line)
    return 0 if rep.passed else 1


# --------------------------------------------------------------------------
# analyze


def _analysis_gate(rep) -> list[str]:
    """Failures that make the deviation analysis meaningless.

    A player without any profitable deviation is not fatal here: it is the
    case where preferred profiles are sustainable on their own.
    """
    bad = [c for c in rep.checks if c.name != "A4" and not c.passed]
    out = [f"{c.name}: {c.detail}" for c in bad]
    a4 = rep["A4"]
    if not a4.passed and any(f[2] is not None for f in a4.witness.get("all", [])):
        out.append(f"A4: {a4.detail}")
    return out


def _write_analysis(path: Path, game, fr, stats, rep, lo, prop1, summary: dict) -> None:
    n = game.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ANALYSIS_COLUMNS)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                aw = stats.alpha_witness.get((i, j))
                bw = stats.beta_witness.get((i, j))
                w.writerow(["pair", i + 1, j + 1, _fmt(stats.alpha[i, j]),
                            "" if aw is None else game.actions[j].describe(aw),
                            _fmt(stats.beta[i, j]),
                            "" if bw is None else game.actions[j].describe(bw),
                            "", "", "", "", "", "", "", ""])
        for i in range(n):
            w.writerow(["player", i + 1, "", "", "", "", "", _fmt(fr.lam[i]),
                        _fmt(fr.v_tilde[i, i]), _fmt(rep.mu[i]) if rep else "",
                        _fmt(lo[i]), _fmt(prop1[i]),
                        _vec(rep.vhat[i]) if rep else "", "", ""])
        for name, value in summary.items():
            w.writerow(["summary", "", "", "", "", "", "", "", "", "", "", "", "", name,
                        _fmt(value)])


def cmd_analyze(args, cfg) -> int:
    m = _grid(args, cfg)
    game = cfg.build_game(m)
    vrep = validate_assumptions(game, m, strict_support=args.strict_support)
    fatal = _analysis_gate(vrep)
    if fatal:
        print("assumptions fail; analysis skipped")
        for line in fatal:
            print("  " + line)
        return 1
    fr = vrep.frontier
    stats = deviation_stats(game, fr, m)
    lo = mu_min(fr, stats)
    prop1 = [check_prop1(game, fr, i, m) for i in range(game.n)]
    mu = cfg.analysis.get("mu")
    delta = cfg.analysis.get("delta")
    out = _out_dir(args) / "analysis.csv"
    print(f"game: {game.name}")
    print("alpha:\n" + np.array2string(stats.alpha, precision=6))
    print("beta:\n" + np.array2string(stats.beta, precision=6))
    print("mu_min: (" + ", ".join(f"{x:.4f}" for x in lo) + ")")
    for i, flag in enumerate(prop1):
        if flag:
            print(f"player {i + 1}: no profitable deviation from the preferred profile; "
                  f"it is sustainable on its own")
    try:
        rep = check_conditions(game, fr, stats, mu, delta, m)
    except InfeasibleMu as exc:
        used = lo if mu is None else mu
        print(f"Condition 3 infeasible: requires mu >= ({', '.join(f'{x:.4f}' for x in lo)}), "
              f"weighted sum {float(fr.lam @ used):.4f} > 1")
        _write_analysis(out, game, fr, stats, None, lo, prop1,
                        {"status": "infeasible", "weighted_sum": float(fr.lam @ used)})
        print(f"wrote {out}")
        return 1
    summary = {"status": "pass" if rep.passed else "fail", "weighted_sum": rep.weighted_sum,
               "delta": delta, "delta_min": rep.delta_min, "regular": rep.regular}
    for name, c in rep.conditions.items():
        summary[f"{name}_pass"] = "" if c.passed is None else c.passed
        summary[f"{name}_margin"] = c.margin
        summary[f"{name}_witness"] = c.witness
    dmin = "n/a" if rep.delta_min is None else f"{rep.delta_min:.4f}"
    print(f"delta_min: {dmin}")
    for name, c in rep.conditions.items():
        verdict = "n/a" if c.passed is None else ("PASS" if c.passed else "FAIL")
        print(f"{name}: {verdict} margin={c.margin:.6g} {c.witness}")
    print(f"regular: {rep.regular}")
    if game.n == 2:
        tp = two_player(game, fr, stats, m)
        print("two players: " + tp.describe())
        summary["two_player_case"] = tp.case
        summary["two_player_delta_star"] = tp.delta_star
    _write_analysis(out, game, fr, stats, rep, lo, prop1, summary)
    print(f"wrote {out}")
    return 0 if rep.passed else 1


# --------------------------------------------------------------------------
# run / simulate / oracle


def _equilibrium(args, cfg, require: bool = True) -> EquilibriumConfig:
    delta = cfg.analysis.get("delta")
    if delta is None:
        raise ConfigError("[analysis] needs delta for this command")
    m = _grid(args, cfg)
    return EquilibriumConfig.build(cfg.build_game(m), delta, cfg.analysis.get("mu"),
                                   cfg.analysis.get("v0"), m, require_conditions=require)


def cmd_run(args, cfg) -> int:
    eq = _equilibrium(args, cfg)
    T = args.horizon or cfg.analysis.get("horizon") or cfg.simulation.get("horizon") or 100
    seed = args.seed if args.seed is not None else cfg.analysis.get("seed", 0)
    traj = run(eq, int(seed), int(T))
    out = _out_dir(args) / "trajectory.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(traj.header(eq.n))
        for row in traj.rows():
            w.writerow([_fmt(x) for x in row])
    final = traj.records[-1].v_next
    print(f"ran {T} periods from v0={np.array2string(eq.v0, precision=6)}; "
          f"final v={np.array2string(final, precision=6)}")
    print(f"wrote {out}")
    return 0


def _parse_policies(spec: str, eq: EquilibriumConfig) -> list[DeviationPolicy]:
    out = []
    for item in [s.strip() for s in spec.replace(";", ",").split(",") if s.strip()]:
        parts = item.split(":")
        try:
            j = int(parts[0]) - 1
            mode = parts[1] if len(parts) > 1 else "stationary"
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"bad deviation spec {item!r}") from exc
        if not 0 <= j < eq.n:
            raise ConfigError(f"deviation spec {item!r} names no player")
        action = None
        if len(parts) > 2:
            space = eq.game.actions[j]
            try:
                action = float(space.index(parts[2])) if space.is_finite else float(parts[2])
            except ValueError as exc:
                raise ConfigError(f"unknown action in deviation spec {item!r}") from exc
        try:
            out.append(DeviationPolicy(j, mode, action))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return out


def _default_horizon(delta: float) -> int:
    return int(math.ceil(math.log(1e-9) / math.log(delta))) + 1


def cmd_simulate(args, cfg) -> int:
    eq = _equilibrium(args, cfg)
    sim = cfg.simulation
    E = args.episodes or sim.get("episodes", 10_000)
    T = args.horizon or sim.get("horizon") or _default_horizon(eq.delta)
    seed = args.seed if args.seed is not None else sim.get("seed", 0)
    res = simulate(eq, int(E), int(T), int(seed), sim.get("eps_trunc"))
    out = _out_dir(args)
    with open(out / "simulation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode"] + [f"u_{k + 1}" for k in range(eq.n)] + ["digest"])
        for k, row in enumerate(res.payoffs):
            w.writerow([k] + [_fmt(x) for x in row] + [res.digests[k]])
    verdicts = {}
    z = np.abs(res.mean - eq.v0) / res.stderr
    verdicts["unbiased"] = bool(np.all(z <= 3))
    if "deviations" in sim:
        policies = _parse_policies(sim["deviations"], eq)
    else:
        pts = sim.get("deviation_points", 21)
        policies = [p for j in range(eq.n) for p in stationary_policies(eq, j, pts)]
        policies += [DeviationPolicy(j, "myopic") for j in range(eq.n)]
    devs = []
    for pol in policies:
        # common random numbers: the deviation replays the baseline's uniforms
        val, se = deviation_value(eq, pol, int(E), int(T), int(seed), sim.get("eps_trunc"),
                                  _grid(args, cfg))
        j = pol.deviator
        pooled = math.sqrt(se ** 2 + res.stderr[j] ** 2)
        gain = val - res.mean[j]
        ok = bool(gain <= 3 * pooled)
        action = None if pol.action is None else eq.game.actions[j].describe(pol.action)
        devs.append({"deviator": j + 1, "mode": pol.mode, "action": action, "value": val,
                     "stderr": se, "gain": gain, "pooled_stderr": pooled, "pass": ok})
    verdicts["no_profitable_deviation"] = all(d["pass"] for d in devs)
    summary = {"episodes": int(E), "horizon": int(T), "seed": int(seed),
               "v0": eq.v0.tolist(), "mean": res.mean.tolist(), "stderr": res.stderr.tolist(),
               "bad_rate": res.bad_rate, "expected_bad_rate": res.expected_bad_rate,
               "deviations": devs, "verdicts": verdicts}
    (out / "simulation_summary.json").write_text(json.dumps(summary, indent=2))
    print(f"mean payoff {np.array2string(res.mean, precision=6)} "
          "(stderr " + ", ".join(f"{x:.2g}" for x in res.stderr) + ") target "
          f"{np.array2string(eq.v0, precision=6)}")
    worst = max(devs, key=lambda d: d["gain"] / d["pooled_stderr"]) if devs else None
    if worst:
        print(f"largest deviation gain {worst['gain']:.3g} "
              f"({worst['gain'] / worst['pooled_stderr']:.2f} pooled stderr) by player "
              f"{worst['deviator']} {worst['mode']} {worst['action'] or ''}")
    for k, v in verdicts.items():
        print(f"{k}: {'PASS' if v else 'FAIL'}")
    return 0 if all(verdicts.values()) else 1


def cmd_oracle(args, cfg) -> int:
    delta = cfg.analysis.get("delta")
    if delta is None:
        raise ConfigError("[analysis] needs delta for this command")
    m = _grid(args, cfg)
    game = cfg.build_game(m)
    fr = efficient_frontier(game, m)
    stats = deviation_stats(game, fr, m)
    mu = cfg.analysis.get("mu")
    mu = mu_min(fr, stats) if mu is None else mu
    k = cfg.analysis.get("oracle_grid", 101)
    res = is_self_generating(game, fr, stats, mu, delta, k, m)
    orc = DecompositionOracle(game, fr, mu, delta, stats, m)
    out = _out_dir(args) / "oracle.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"v_{c + 1}" for c in range(game.n)]
                   + ["feasible", "margin", "active", "binding"])
        for p, marg, act in zip(res.points, res.margins, res.actives):
            d = orc.solve(p, int(act))
            w.writerow([_fmt(x) for x in p] + [_fmt(bool(marg >= -1e-12)), _fmt(marg),
                                               int(act) + 1, "|".join(d.binding)])
    verdict = "self-generating" if res.self_generating else "not self-generating"
    print(f"V_mu at delta={delta}: {verdict}; worst point "
          f"{np.array2string(res.worst_point, precision=6)} margin {res.worst_margin:.3g}")
    print(f"wrote {out}")
    return 0 if res.self_generating else 1


# --------------------------------------------------------------------------
# sweep


def sweep_point(game, m=None) -> dict:
    """Largest symmetric slack ``1 - eta`` with floors ``eta * v_tilde[i, i]``."""
    row = {"eta": None, "fraction": 0.0, "delta_min": None, "feasible": False, "status": "",
           "cond1": None, "cond2": None, "regular": None}
    try:
        fr = efficient_frontier(game, m)
    except (NonUniqueArgmax, SingularFrontier, NonPositiveWeight) as exc:
        row["status"] = f"frontier: {exc}"
        return row
    on_path = np.array([game.rho_bad(i, fr.a_tilde[i])[0] for i in range(game.n)])
    if np.any(on_path <= 0) or np.any(on_path >= 1):
        row["status"] = "degenerate signal"
        return row
    try:
        stats = deviation_stats(game, fr, m)
    except LabelingViolation as exc:
        row["status"] = f"labeling: {exc}"
        return row
    own = fr.own_payoffs()
    eta = float(np.max(mu_min(fr, stats) / own))
    mu = eta * own
    row["eta"] = eta
    total = float(fr.lam @ mu)
    if total >= 1 - 1e-12:
        row["status"] = "infeasible"
        return row
    rep = check_conditions(game, fr, stats, mu, None, m)
    row.update(cond1=rep.cond1.passed, cond2=rep.cond2.passed, regular=rep.regular)
    try:
        row["delta_min"] = min_discount(fr, stats, mu)
    except DegenerateDenominator as exc:
        row["status"] = f"degenerate: {exc}"
        return row
    row["feasible"] = bool(rep.regular)
    row["fraction"] = 1 - eta if rep.regular else 0.0
    row["status"] = "ok" if (rep.cond1.passed and rep.cond2.passed) else "conditions fail"
    return row


def run_sweep(cfg, m=None) -> list[dict]:
    sw = cfg.sweep
    values = np.linspace(sw["start"], sw["stop"], sw["steps"])
    name = sw["parameter"]
    rows = []
    if name == "delta":
        game = cfg.build_game(m)
        base = sweep_point(game, m)
        for v in values:
            r = dict(base, value=float(v))
            r["feasible"] = bool(base["feasible"] and base["delta_min"] is not None
                                 and v >= base["delta_min"])
            if not r["feasible"]:
                r["fraction"] = 0.0
            rows.append(r)
        return rows
    for v in values:
        try:
            game = cfg.build_game(m, **{name: float(v)})
        except ParameterConstraintViolated as exc:
            rows.append({"value": float(v), "eta": None, "fraction": 0.0, "delta_min": None,
                         "feasible": False, "status": f"constraint: {exc}", "cond1": None,
                         "cond2": None, "regular": None})
            continue
        rows.append(dict(sweep_point(game, m), value=float(v)))
    return rows


def cmd_sweep(args, cfg) -> int:
    if not cfg.sweep:
        raise ConfigError("configuration has no [sweep] section")
    rows = run_sweep(cfg, _grid(args, cfg))
    out = _out_dir(args) / "sweep.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    best = max(rows, key=lambda r: r["fraction"])
    print(f"swept {cfg.sweep['parameter']} over {len(rows)} points; largest fraction "
          f"{best['fraction']:.4f} at {best['value']:.6g}")
    print(f"wrote {out}")
    return 0


# --------------------------------------------------------------------------

COMMANDS = {"validate": cmd_validate, "analyze": cmd_analyze, "run": cmd_run,
            "simulate": cmd_simulate, "sweep": cmd_sweep, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="efficient-ppe",
                                description="Efficient equilibria of repeated games with "
                                            "two-signal public monitoring.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--grid", type=int, default=None, metavar="M")
    p.add_argument("--strict-support", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.grid is not None and args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        cfg = config_mod.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, TruncationTooCoarse) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParameterConstraintViolated, InfeasibleMu) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 1
    except PPEError as exc:
        print(f"analysis failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
