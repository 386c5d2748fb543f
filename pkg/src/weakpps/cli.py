"""Command-line scenario runner emitting plot-ready CSV or JSON tables.

Usage:
    weakpps deflection-scan --preset fig1 --format csv
    weakpps theta-scan --scenario my.json --out table.json --format json
    weakpps interferometer --gamma 0.01 --phi-start -0.05 --phi-stop 0.05 --steps 11
    weakpps verify

Exit codes: 0 success, 1 scenario error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Iterable

import numpy as np

from .engine import (
    involution_scale,
    pointer_distribution_exact,
    pointer_distribution_weak,
)
from .errors import WeakPPSError
from .meters import GaussianMeter, meter_moments
from .metrology import (
    INTERFEROMETER_OBSERVABLE,
    amplification,
    classify_regime,
    interferometer_meter,
    interferometer_scenario,
    interferometer_states,
)
from .oracle import GridMeterState, PPSSystem, mc_sample
from .scenarios import PRESETS, Scenario, ScenarioError, preset, run_scenario
from .verify import run_checks, threebox_tables
from .weakvalues import weak_value, weak_value_report

DEFAULT_PRESET = {
    "weakvalue": "fig6",
    "deflection-scan": "fig1",
    "theta-scan": "fig2",
    "resonance-scan": "fig4",
    "distribution": "fig1",
    "regimes": "fig1",
}
EXTRA_PRESETS = {
    "threebox": "three-box problem: ABL and weak probabilities (threebox command)",
}


# ---------------------------------------------------------------- formatting


def _cell_csv(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _cell_json(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def format_table(rows: list[dict], fmt: str, columns: list[str] | None = None) -> str:
    """CSV with one header row, or a JSON array of row objects, in column order."""
    cols = columns if columns is not None else (list(rows[0]) if rows else [])
    if fmt == "json":
        data = [{c: _cell_json(r.get(c, math.nan)) for c in cols} for r in rows]
        return json.dumps(data, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell_csv(r.get(c, math.nan)) for c in cols])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- scenarios


def load_scenario(args: argparse.Namespace, command: str) -> Scenario:
    if args.scenario and args.preset:
        raise ScenarioError("give either --scenario or --preset, not both")
    if args.scenario:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
        return Scenario.from_dict(data)
    name = args.preset or DEFAULT_PRESET.get(command)
    if name is None:
        raise ScenarioError(f"{command} needs --scenario or --preset")
    return preset(name)


def _point_gamma(spec: dict) -> float:
    if "gamma" not in spec:
        raise ScenarioError("scenario needs gamma")
    return float(spec["gamma"])


def cmd_table(args: argparse.Namespace) -> list[dict]:
    sc = load_scenario(args, args.command)
    return run_scenario(sc, seed=args.seed)


def cmd_distribution(args: argparse.Namespace) -> list[dict]:
    """Weak (second-order) and exact conditional pointer densities on a grid."""
    sc = load_scenario(args, "distribution")
    value = sc.sweep_values()[0] if args.value is None else args.value
    spec, system, meters = sc._point(value)
    gamma = args.gamma if args.gamma is not None else _point_gamma(spec)
    labels = [args.meter] if args.meter else list(meters)
    for label in labels:
        if label not in meters:
            raise ScenarioError(f"unknown meter {label!r}; available: {', '.join(meters)}")
    s = math.sqrt(involution_scale(system.a))
    wv = weak_value_report(system.a / s, system.rho, system.e)
    grid = None
    first = meters[labels[0]]
    if isinstance(first, GaussianMeter):
        c, w = (first.p_bar, first.delta_p) if first.role == "coinciding" else (first.q_bar, first.delta_q)
        grid = np.linspace(c - args.width * w, c + args.width * w, args.points)
    cols: dict[str, np.ndarray] = {}
    x = None
    for label in labels:
        weak = pointer_distribution_weak(gamma * s, wv, meters[label], grid)
        exact = pointer_distribution_exact(gamma * s, wv, meters[label], grid)
        if x is None:
            x = weak.grid
        elif weak.grid.shape != x.shape or np.any(weak.grid != x):
            raise ScenarioError("meters in one distribution table must share a pointer grid")
        cols[f"{label}.weak"] = weak.density
        cols[f"{label}.exact"] = exact.density
    assert x is not None
    return [{"x": float(x[i]), **{k: float(v[i]) for k, v in cols.items()}} for i in range(len(x))]


def cmd_regimes(args: argparse.Namespace) -> list[dict]:
    """Small parameters, regime and gain coefficients at every sweep point."""
    sc = load_scenario(args, "regimes")
    rows = []
    for value in sc.sweep_values():
        spec, system, meters = sc._point(value)
        gamma = _point_gamma(spec)
        row: dict[str, Any] = {sc.parameter: float(value)}
        errors = []
        try:
            wv = weak_value_report(system.a, system.rho, system.e)
            a2 = abs(weak_value(system.a @ system.a, system.rho, system.e))
        except WeakPPSError as exc:
            wv, errors = None, [f"weakvalue: {type(exc).__name__}"]
        for label, meter in meters.items():
            keys = ("mu", "mu0", "mu_w", "regime", "weak_valid", "proper_a", "enhancement", "n0")
            row.update({f"{label}.{k}": math.nan for k in keys})
            if wv is None:
                continue
            m = meter_moments(meter)
            overlap = math.sqrt(wv.post_prob)
            rep = classify_regime(gamma, abs(wv.a_w) * overlap, wv.a_w, m, a2)
            row.update(
                {
                    f"{label}.mu": rep.mu,
                    f"{label}.mu0": rep.mu0,
                    f"{label}.mu_w": rep.mu_w,
                    f"{label}.regime": rep.regime.value,
                    f"{label}.weak_valid": rep.weak_valid,
                }
            )
            try:
                amp = amplification(gamma, overlap, m, rep, wv.post_prob)
            except WeakPPSError as exc:
                errors.append(f"{label}: {type(exc).__name__}")
                continue
            row.update(
                {
                    f"{label}.proper_a": amp.proper_a,
                    f"{label}.enhancement": amp.enhancement,
                    f"{label}.n0": amp.n0,
                }
            )
        row["error"] = "; ".join(errors)
        rows.append(row)
    return rows


def _phis(args: argparse.Namespace) -> Iterable[float]:
    if args.phi is not None:
        return [args.phi]
    if args.steps < 2 or not (math.isfinite(args.phi_start) and math.isfinite(args.phi_stop)):
        raise ScenarioError("phi sweep needs a finite range and at least 2 steps")
    return [float(v) for v in np.linspace(args.phi_start, args.phi_stop, args.steps)]


def cmd_interferometer(args: argparse.Namespace) -> list[dict]:
    """Beam-deflection phase measurement: deflections and SNR figures per phi."""
    if not args.delta_q > 0 or args.n < 1:
        raise ScenarioError("need --delta-q > 0 and --n >= 1")
    seed = 0 if args.seed is None else args.seed
    grid = GridMeterState.from_gaussian(interferometer_meter(args.delta_q)) if args.mc else None
    rows = []
    for phi in _phis(args):
        row: dict[str, Any] = {"phi": phi}
        try:
            rep = interferometer_scenario(args.gamma, phi, args.delta_q, args.n)
        except WeakPPSError as exc:
            row["error"] = type(exc).__name__
            rows.append(row)
            continue
        row.update(rep.to_json())
        if grid is not None:
            psi, post = interferometer_states(phi)
            system = PPSSystem(psi.projector(), INTERFEROMETER_OBSERVABLE, post.projector())
            stats = mc_sample(system, grid, args.gamma, args.mc, seed, readout="p")
            row.update(
                mc_mean=stats.mean,
                mc_post_prob=stats.acceptance_rate,
                mc_snr=stats.snr(0.0) * math.sqrt(args.n / args.mc),
                mc_split_snr=mc_sample(
                    system, grid, args.gamma, args.mc, seed, readout="p", statistic=np.sign
                ).snr(0.0) * math.sqrt(args.n / args.mc),
            )
        row["error"] = ""
        rows.append(row)
    cols: list[str] = []
    for r in rows:
        cols += [c for c in r if c not in cols and c != "error"]
    return [{c: r.get(c, math.nan) for c in cols + ["error"]} for r in rows]


def cmd_threebox(args: argparse.Namespace) -> list[dict]:
    return threebox_tables()


def cmd_verify(args: argparse.Namespace) -> list[dict]:
    return [
        {"check": r.name, "passed": r.passed, "detail": r.detail}
        for r in run_checks(0 if args.seed is None else args.seed)
    ]


COMMANDS = {
    "weakvalue": (cmd_table, "qubit weak values along a sweep (default preset fig6)"),
    "deflection-scan": (cmd_table, "pointer deflection vs a sweep parameter (default preset fig1)"),
    "theta-scan": (cmd_table, "deflection vs the weak-value phase (default preset fig2)"),
    "resonance-scan": (cmd_table, "narrow-resonance deflection vs gamma (default preset fig4)"),
    "distribution": (cmd_distribution, "weak vs exact pointer distributions at one point"),
    "interferometer": (cmd_interferometer, "phase interferometer deflection and SNR figures"),
    "threebox": (cmd_threebox, "three-box problem probabilities"),
    "regimes": (cmd_regimes, "small parameters, regime and gain coefficients"),
    "verify": (cmd_verify, "run the self-check suite"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--preset", help="embedded scenario name (see --list-presets)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=None, help="seed for Monte Carlo columns")
    common.add_argument("--out", help="write the table here instead of stdout")
    common.add_argument("--list-presets", action="store_true", help="list embedded presets and exit")

    parser = argparse.ArgumentParser(prog="weakpps", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, parents=[common])
        if name == "distribution":
            p.add_argument("--gamma", type=float, default=None, help="coupling (default: scenario gamma)")
            p.add_argument("--value", type=float, default=None, help="sweep value (default: first)")
            p.add_argument("--meter", default=None, help="meter label (default: all)")
            p.add_argument("--points", type=int, default=401)
            p.add_argument("--width", type=float, default=6.0, help="grid half-width in meter widths")
        if name == "interferometer":
            p.add_argument("--gamma", type=float, default=0.01)
            p.add_argument("--delta-q", type=float, default=1.0)
            p.add_argument("--n", type=int, default=1_000_000, help="photon number for SNR figures")
            p.add_argument("--phi", type=float, default=None, help="single phase")
            p.add_argument("--phi-start", type=float, default=-0.1)
            p.add_argument("--phi-stop", type=float, default=0.1)
            p.add_argument("--steps", type=int, default=41)
            p.add_argument("--mc", type=int, default=0, help="Monte Carlo trials per phase (0: off)")
    return parser


def list_presets() -> list[dict]:
    rows = [
        {"name": k, "command": v["command"], "description": v["description"]} for k, v in sorted(PRESETS.items())
    ]
    rows += [{"name": k, "command": k, "description": d} for k, d in EXTRA_PRESETS.items()]
    return rows


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.list_presets:
            _emit(format_table(list_presets(), args.format), args.out)
            return 0
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        if args.command == "threebox" and args.preset not in (None, "threebox"):
            raise ScenarioError("threebox takes no preset other than 'threebox'")
        rows = COMMANDS[args.command][0](args)
        _emit(format_table(rows, args.format), args.out)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not a scenario error
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (ScenarioError, WeakPPSError, ValueError, OSError) as exc:
        print(f"weakpps: error: {exc}", file=sys.stderr)
        return 1
    if args.command == "verify":
        for r in rows:
            if not r["passed"]:
                print(f"weakpps: check failed: {r['check']} ({r['detail']})", file=sys.stderr)
        return 0 if all(r["passed"] for r in rows) else 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
