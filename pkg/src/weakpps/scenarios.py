"""Scenario descriptions, embedded presets and the deterministic sweep runner.

A scenario is a JSON object::

    {"name": ..., "system": {...}, "meters": {label: {...}}, "gamma": ...,
     "sweep": {"parameter": "gamma", "start": ..., "stop": ..., "steps": ...},
     "methods": ["nonlinear", "exact", ...], "seed": 0, "mc_samples": 20000}

The sweep parameter is a dotted path into the scenario (for example
"gamma", "system.theta" or "system.kappa"); each sweep point is evaluated
on a copy with that entry replaced.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import SIGMA_X, SIGMA_Z, DensityMatrix, Ket, bloch_state, matrix_from_json
from .engine import (
    MeasurementOutcome,
    exact_pps,
    involution_scale,
    pps_deflection_inverted,
    pps_deflection_linear,
    pps_deflection_nonlinear,
    pps_deflection_resonance,
    resonance_parameters,
)
from .errors import WeakPPSError
from .meters import (
    GaussianMeter,
    MatrixMeter,
    QubitMeter,
    meter_moments,
    trig_moments,
)
from .metrology import interferometer_states
from .oracle import GridMeterState, PPSSystem, grid_pps_average, mc_sample, tensor_pps_average
from .weakvalues import WeakValueReport, weak_value_report

METHODS = ("linear", "nonlinear", "inverted", "resonance", "exact", "oracle", "mc")
SYSTEM_METHODS = ("weakvalue",)
MAX_STEPS = 100_000


class ScenarioError(WeakPPSError, ValueError):
    """A scenario description is malformed."""


# ------------------------------------------------------------------ builders


def _ket(data: Any) -> np.ndarray:
    return matrix_from_json(data, ndim=1)


def build_system(spec: dict) -> PPSSystem:
    """PPS system from a system spec.

    Types: "qubit" (kappa, nu, p_in; A = sigma_x, post-selection on |-z>),
    "weak_value" (modulus, theta; the pure qubit realizing that weak value),
    "interferometer" (phi), "matrix" (a, rho or psi, e or phi).
    """
    kind = spec.get("type")
    minus_z = np.array([[0, 0], [0, 1]], dtype=complex)
    if kind == "qubit":
        rho = bloch_state(float(spec["kappa"]), float(spec.get("nu", 0.0)), float(spec.get("p_in", 1.0)))
        return PPSSystem(rho.matrix, SIGMA_X, minus_z)
    if kind == "weak_value":
        modulus = float(spec["modulus"])
        if modulus < 0:
            raise ScenarioError("weak-value modulus must be non-negative")
        kappa = 2 * math.atan2(1.0, modulus)
        return PPSSystem(bloch_state(kappa, -float(spec.get("theta", 0.0))).matrix, SIGMA_X, minus_z)
    if kind == "interferometer":
        psi, post = interferometer_states(float(spec["phi"]))
        return PPSSystem(psi.projector(), SIGMA_Z, post.projector())
    if kind == "matrix":
        a = matrix_from_json(spec["a"])
        if "rho" in spec:
            rho = DensityMatrix(matrix_from_json(spec["rho"])).matrix
        else:
            rho = Ket.normalized(_ket(spec["psi"])).projector()
        e = matrix_from_json(spec["e"]) if "e" in spec else Ket.normalized(_ket(spec["phi"])).projector()
        return PPSSystem(rho, a, e)
    raise ScenarioError(f"unknown system type {kind!r}")


Meter = GaussianMeter | QubitMeter | MatrixMeter


def build_meter(spec: dict) -> Meter:
    """Meter from a meter spec: "gaussian", "coinciding", "qubit" or "matrix"."""
    kind = spec.get("type")
    if kind == "gaussian":
        return GaussianMeter(
            float(spec.get("p_bar", 0.0)),
            float(spec.get("q_bar", 0.0)),
            float(spec.get("delta_p", 1.0)),
            float(spec.get("b", 0.0)),
            spec.get("role", "conjugate"),
        )
    if kind == "coinciding":
        return GaussianMeter(float(spec.get("f_bar", 0.0)), 0.0, float(spec.get("delta_f", 1.0)), 0.0, "coinciding")
    if kind == "qubit":
        if "config" in spec:
            return QubitMeter.configuration(
                int(spec["config"]), float(spec.get("f0", 0.0)), float(spec.get("eta", math.pi / 2))
            )
        return QubitMeter(
            tuple(spec.get("n_f", (1.0, 0.0, 0.0))),
            tuple(spec.get("n_r", (0.0, 1.0, 0.0))),
            float(spec.get("f0", 0.0)),
            tuple(spec.get("s_m", (0.0, 0.0, 0.0))),
        )
    if kind == "matrix":
        return MatrixMeter(matrix_from_json(spec["rho"]), matrix_from_json(spec["f"]), matrix_from_json(spec["r"]))
    raise ScenarioError(f"unknown meter type {kind!r}")


# ------------------------------------------------------------------ methods


def _oracle(system: PPSSystem, meter: Meter, gamma: float) -> MeasurementOutcome:
    if isinstance(meter, GaussianMeter):
        readout = "p" if meter.role == "coinciding" else "q"
        return grid_pps_average(system, GridMeterState.from_gaussian(meter), gamma, readout)
    if isinstance(meter, QubitMeter):
        rho, f, r = meter.operators()
        meter = MatrixMeter(rho, f, r)
    return tensor_pps_average(system, meter, gamma)


def _mc(system: PPSSystem, meter: Meter, gamma: float, n: int, seed: int) -> float:
    if isinstance(meter, GaussianMeter):
        readout = "p" if meter.role == "coinciding" else "q"
        stats = mc_sample(system, GridMeterState.from_gaussian(meter), gamma, n, seed, readout=readout)
    else:
        if isinstance(meter, QubitMeter):
            meter = MatrixMeter(*meter.operators())
        stats = mc_sample(system, meter, gamma, n, seed)
    return stats.mean - meter_moments(meter).r_bar


def _exact(system: PPSSystem, meter: Meter, gamma: float) -> float:
    s = math.sqrt(involution_scale(system.a))
    wv = weak_value_report(system.a / s, system.rho, system.e)
    return exact_pps(gamma * s, wv, trig_moments(meter, gamma * s), meter_moments(meter).r_bar).deflection


def evaluate(method: str, system: PPSSystem, wv: WeakValueReport, meter: Meter, gamma: float, opts: dict) -> float:
    """Deflection of one method at one point."""
    m = meter_moments(meter)
    if method == "linear":
        return pps_deflection_linear(gamma, wv.a_w, m)
    if method == "nonlinear":
        return pps_deflection_nonlinear(gamma, wv, m).deflection
    if method == "inverted":
        return pps_deflection_inverted(gamma, wv, m).r_s - m.r_bar
    if method == "resonance":
        rp = resonance_parameters(gamma, wv, m)
        return pps_deflection_resonance(rp.x, rp.epsilon, rp.v, m)
    if method == "exact":
        return _exact(system, meter, gamma)
    if method == "oracle":
        return _oracle(system, meter, gamma).deflection
    if method == "mc":
        return _mc(system, meter, gamma, int(opts.get("mc_samples", 20000)), int(opts.get("seed", 0)))
    raise ScenarioError(f"unknown method {method!r}")


# ------------------------------------------------------------------ scenarios


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; spec keeps the raw JSON for per-point substitution."""

    name: str
    spec: dict

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        spec = copy.deepcopy(data)
        if "system" not in spec:
            raise ScenarioError("scenario needs a system")
        methods = spec.setdefault("methods", ["nonlinear", "exact"])
        for name in methods:
            if name not in METHODS + SYSTEM_METHODS:
                raise ScenarioError(f"unknown method {name!r}")
        if any(m in METHODS for m in methods) and not spec.get("meters"):
            raise ScenarioError("deflection methods need at least one meter")
        sweep = spec.get("sweep")
        if sweep is not None:
            for key in ("parameter", "start", "stop", "steps"):
                if key not in sweep:
                    raise ScenarioError(f"sweep needs {key!r}")
            if not (math.isfinite(float(sweep["start"])) and math.isfinite(float(sweep["stop"]))):
                raise ScenarioError("sweep range must be finite")
            if not 2 <= int(sweep["steps"]) <= MAX_STEPS:
                raise ScenarioError(f"sweep steps must lie in [2, {MAX_STEPS}]")
        elif "gamma" not in spec:
            raise ScenarioError("scenario without a sweep needs gamma")
        sc = cls(str(spec.get("name", "scenario")), spec)
        sc._point(sc.sweep_values()[0])  # build once to surface spec errors early
        return sc

    def sweep_values(self) -> np.ndarray:
        sweep = self.spec.get("sweep")
        if sweep is None:
            return np.array([float(self.spec["gamma"])])
        return np.linspace(float(sweep["start"]), float(sweep["stop"]), int(sweep["steps"]))

    @property
    def parameter(self) -> str:
        sweep = self.spec.get("sweep")
        return "gamma" if sweep is None else sweep["parameter"]

    def _point(self, value: float) -> tuple[dict, PPSSystem, dict[str, Meter]]:
        spec = copy.deepcopy(self.spec)
        keys = self.parameter.split(".")
        node = spec
        for k in keys[:-1]:
            if k not in node:
                raise ScenarioError(f"sweep path {self.parameter!r} not found")
            node = node[k]
        node[keys[-1]] = float(value)
        try:
            system = build_system(spec["system"])
            meters = {label: build_meter(m) for label, m in sorted(spec.get("meters", {}).items())}
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario: {exc!r}") from exc
        return spec, system, meters

    def columns(self) -> list[str]:
        cols = [self.parameter]
        methods = self.spec["methods"]
        if "weakvalue" in methods:
            cols += ["a_w_re", "a_w_im", "a_w_abs", "a_w_11", "post_prob"]
        labels = sorted(self.spec.get("meters", {}))
        cols += [f"{label}.{m}" for label in labels for m in methods if m in METHODS]
        return cols + ["error"]


def run_scenario(scenario: Scenario, seed: int | None = None) -> list[dict]:
    """One row per sweep value, columns in the fixed order of Scenario.columns.

    Failures of a method at a point leave NaN in its cell and are listed in
    the row's error column; the sweep continues.
    """
    opts = dict(scenario.spec)
    if seed is not None:
        opts["seed"] = seed
    rows = []
    for value in scenario.sweep_values():
        spec, system, meters = scenario._point(value)
        gamma = float(spec.get("gamma", 0.0))
        row: dict[str, Any] = {scenario.parameter: float(value)}
        errors: list[str] = []
        try:
            wv: WeakValueReport | None = weak_value_report(system.a, system.rho, system.e)
        except WeakPPSError as exc:
            wv = None
            errors.append(f"weakvalue: {type(exc).__name__}")
        if "weakvalue" in spec["methods"]:
            if wv is None:
                row.update({k: math.nan for k in ("a_w_re", "a_w_im", "a_w_abs", "a_w_11", "post_prob")})
            else:
                row.update(
                    a_w_re=wv.a_w.real,
                    a_w_im=wv.a_w.imag,
                    a_w_abs=abs(wv.a_w),
                    a_w_11=wv.a_w_11,
                    post_prob=wv.post_prob,
                )
        for label, meter in meters.items():
            for method in spec["methods"]:
                if method not in METHODS:
                    continue
                key = f"{label}.{method}"
                if wv is None:
                    row[key] = math.nan
                    continue
                try:
                    row[key] = float(evaluate(method, system, wv, meter, gamma, opts))
                except (WeakPPSError, ValueError, ZeroDivisionError) as exc:
                    row[key] = math.nan
                    errors.append(f"{key}: {type(exc).__name__}")
        row["error"] = "; ".join(errors)
        rows.append({c: row.get(c, math.nan) for c in scenario.columns()})
    return rows


# ------------------------------------------------------------------- presets

_P_FAMILIES = {
    "R=p,pbar=0": {"type": "gaussian", "p_bar": 0.0, "delta_p": 1.0, "role": "coinciding"},
    "R=p,pbar=1": {"type": "gaussian", "p_bar": 1.0, "delta_p": 1.0, "role": "coinciding"},
    "R=q,pbar=0,b=0": {"type": "gaussian", "p_bar": 0.0, "b": 0.0, "delta_p": 1.0, "role": "conjugate"},
    "R=q,pbar=1,b=1": {"type": "gaussian", "p_bar": 1.0, "b": 1.0, "delta_p": 1.0, "role": "conjugate"},
}

_RESONANT_FAMILIES = {
    "R=p,pbar=10": {"type": "gaussian", "p_bar": 10.0, "delta_p": 1.0, "role": "coinciding"},
    "R=q,pbar=10,b=0": {"type": "gaussian", "p_bar": 10.0, "b": 0.0, "delta_p": 1.0, "role": "conjugate"},
    "R=q,pbar=10,b=1": {"type": "gaussian", "p_bar": 10.0, "b": 1.0, "delta_p": 1.0, "role": "conjugate"},
}

PRESETS: dict[str, dict] = {
    "fig1": {
        "name": "fig1",
        "description": "deflection vs gamma, |A_w| = 20, arg A_w = -pi/4, four Gaussian meter families",
        "command": "deflection-scan",
        "system": {"type": "weak_value", "modulus": 20.0, "theta": -math.pi / 4},
        "meters": _P_FAMILIES,
        "sweep": {"parameter": "gamma", "start": -0.3, "stop": 0.3, "steps": 241},
        "methods": ["linear", "nonlinear", "exact"],
    },
    "fig2": {
        "name": "fig2",
        "description": "deflection vs arg A_w at gamma = 0.05, |A_w| = 20",
        "command": "theta-scan",
        "system": {"type": "weak_value", "modulus": 20.0, "theta": 0.0},
        "meters": _P_FAMILIES,
        "gamma": 0.05,
        "sweep": {"parameter": "system.theta", "start": -math.pi, "stop": math.pi, "steps": 181},
        "methods": ["linear", "nonlinear", "exact"],
    },
    "fig3": {
        "name": "fig3",
        "description": "deflection vs preselection angle kappa, gamma = 0.05, nu = pi/4, pure state",
        "command": "deflection-scan",
        "system": {"type": "qubit", "kappa": 0.1, "nu": math.pi / 4, "p_in": 1.0},
        "meters": _P_FAMILIES,
        "gamma": 0.05,
        "sweep": {"parameter": "system.kappa", "start": 0.005, "stop": 1.0, "steps": 200},
        "methods": ["nonlinear", "exact"],
    },
    "fig4": {
        "name": "fig4",
        "description": "narrow resonance vs gamma for pbar = 10, A_w = -50i",
        "command": "resonance-scan",
        "system": {"type": "weak_value", "modulus": 50.0, "theta": -math.pi / 2},
        "meters": _RESONANT_FAMILIES,
        "sweep": {"parameter": "gamma", "start": 0.0, "stop": 0.004, "steps": 201},
        "methods": ["nonlinear", "resonance", "exact"],
    },
    "fig5": {
        "name": "fig5",
        "description": "narrow resonance vs arg A_w near -pi/2 for pbar = 10, |A_w| = 50, gamma = 0.002",
        "command": "theta-scan",
        "system": {"type": "weak_value", "modulus": 50.0, "theta": -math.pi / 2},
        "meters": _RESONANT_FAMILIES,
        "gamma": 0.002,
        "sweep": {"parameter": "system.theta", "start": -math.pi / 2 - 0.5, "stop": -math.pi / 2 + 0.5, "steps": 201},
        "methods": ["nonlinear", "resonance", "exact"],
    },
    "fig6": {
        "name": "fig6",
        "description": "qubit weak value and associated weak value vs kappa, nu = 0, preselection purity 0.99",
        "command": "weakvalue",
        "system": {"type": "qubit", "kappa": 0.1, "nu": 0.0, "p_in": 0.99},
        "sweep": {"parameter": "system.kappa", "start": 0.0, "stop": 0.6, "steps": 121},
        "methods": ["weakvalue"],
    },
    "fig6-pure": {
        "name": "fig6-pure",
        "description": "qubit weak value vs kappa, nu = 0, pure preselection",
        "command": "weakvalue",
        "system": {"type": "qubit", "kappa": 0.1, "nu": 0.0, "p_in": 1.0},
        "sweep": {"parameter": "system.kappa", "start": 0.01, "stop": 0.6, "steps": 119},
        "methods": ["weakvalue"],
    },
    "fig7": {
        "name": "fig7",
        "description": "fig3 with preselection purity 0.99",
        "command": "deflection-scan",
        "system": {"type": "qubit", "kappa": 0.1, "nu": math.pi / 4, "p_in": 0.99},
        "meters": _P_FAMILIES,
        "gamma": 0.05,
        "sweep": {"parameter": "system.kappa", "start": 0.0, "stop": 1.0, "steps": 201},
        "methods": ["nonlinear", "exact"],
    },
    "interferometer": {
        "name": "interferometer",
        "description": "dark-port beam deflection vs phase, gamma = 0.01, delta_q = 1",
        "command": "deflection-scan",
        "system": {"type": "interferometer", "phi": 0.01},
        "meters": {"q": {"type": "coinciding", "f_bar": 0.0, "delta_f": 1.0}},
        "gamma": 0.01,
        "sweep": {"parameter": "system.phi", "start": -0.1, "stop": 0.1, "steps": 200},
        "methods": ["linear", "nonlinear", "exact"],
    },
    "qubit-meter": {
        "name": "qubit-meter",
        "description": "qubit system with a qubit meter (configuration 1), oracle check vs gamma",
        "command": "deflection-scan",
        "system": {"type": "qubit", "kappa": 0.3, "nu": 0.4, "p_in": 1.0},
        "meters": {"qubit-config1": {"type": "qubit", "config": 1}},
        "sweep": {"parameter": "gamma", "start": 0.05, "stop": 2.0, "steps": 40},
        "methods": ["nonlinear", "exact", "oracle"],
    },
}


def preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    data = {k: v for k, v in PRESETS[name].items() if k not in ("description", "command")}
    return Scenario.from_dict(data)

