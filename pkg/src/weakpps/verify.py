"""Self-check suite behind the `verify` command.

Each check recomputes a known identity or compares two independent
computations and reports (name, passed, detail).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import SIGMA_X, ProjectionValuedMeasure, bloch_state
from .engine import exact_pps_system, exact_standard_system, pps_deflection_nonlinear
from .errors import AmbiguousRoot
from .meters import GaussianMeter, MatrixMeter, MeterMoments, QubitMeter, meter_moments
from .metrology import (
    TomographyInput,
    interferometer_scenario,
    invert_gamma,
    tomography_linear,
    tomography_nonlinear,
)
from .oracle import GridMeterState, PPSSystem, grid_pps_average, tensor_pps_average
from .scenarios import preset, run_scenario
from .weakvalues import (
    WeakValueReport,
    abl_probabilities,
    associated_weak_value,
    weak_probabilities,
    weak_value,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", bool(self.passed))


def threebox_system() -> tuple[np.ndarray, np.ndarray]:
    """Preselected and post-selected kets of the three-box problem."""
    return np.array([1, 1, 1]) / math.sqrt(3), np.array([1, 1, -1]) / math.sqrt(3)


def threebox_tables() -> list[dict]:
    """ABL and weak probabilities for each box and for the full three-box PVM."""
    psi, phi = threebox_system()
    rho, e = np.outer(psi, psi.conj()), np.outer(phi, phi.conj())
    rows = []
    for box in range(3):
        p = np.zeros((3, 3))
        p[box, box] = 1.0
        pvm = ProjectionValuedMeasure((p, np.eye(3) - p), (1.0, 0.0))
        rows.append(
            {
                "measurement": f"box{box + 1}-vs-rest",
                "abl_in_box": abl_probabilities(pvm, rho, e).values[0],
                "weak_in_box": weak_probabilities(pvm, rho, e).values[0].real,
            }
        )
    full = ProjectionValuedMeasure(tuple(np.diag(np.eye(3)[i]) for i in range(3)), (1.0, 2.0, 3.0))
    abl = abl_probabilities(full, rho, e).values
    for i in range(3):
        rows.append({"measurement": f"all-boxes:box{i + 1}", "abl_in_box": abl[i], "weak_in_box": math.nan})
    return rows


def _check_threebox() -> CheckResult:
    rows = threebox_tables()
    abl = [r["abl_in_box"] for r in rows]
    weak = [r["weak_in_box"] for r in rows[:3]]
    err = max(
        np.max(np.abs(np.array(abl[:3]) - [1, 1, 0.2])),
        np.max(np.abs(np.array(abl[3:]) - 1 / 3)),
        np.max(np.abs(np.array(weak) - [1, 1, -1])),
    )
    return CheckResult("threebox", bool(err < 1e-12), f"max error {err:.2e}")


def _check_qubit_weak_values() -> CheckResult:
    err = 0.0
    minus_z = np.diag([0.0, 1.0])
    for kappa in np.linspace(0.1, 3.0, 10):
        for nu in np.linspace(-3.0, 3.0, 10):
            aw = weak_value(SIGMA_X, bloch_state(kappa, nu), minus_z)
            err = max(err, abs(aw - np.exp(-1j * nu) / math.tan(kappa / 2)) / abs(aw))
    # Exact mixed-state values: A11(kappa=0) = (1+P)/(1-P), max |A_w| = P (1-P^2)^(-1/2).
    p = 0.99
    a11 = associated_weak_value(SIGMA_X, bloch_state(0.0, 0.0, p), minus_z)
    err = max(err, abs(a11 - (1 + p) / (1 - p)) / a11)
    peak = abs(weak_value(SIGMA_X, bloch_state(math.acos(p), 0.0, p), minus_z))
    err = max(err, abs(peak - p / math.sqrt(1 - p * p)) / peak)
    return CheckResult("qubit-weak-values", err < 1e-12, f"max relative error {err:.2e}")


def _check_optimal_deflection() -> CheckResult:
    err = 0.0
    for b in (0.0, 1.0, 3.0):
        m = meter_moments(GaussianMeter(0.0, 0.0, 1.0, b))
        aw = complex(1, b) / math.sqrt(1 + b * b)
        d = pps_deflection_nonlinear(1.0, WeakValueReport.pure(aw), m).deflection
        err = max(err, abs(d - math.sqrt(1 + b * b) / 2))
    return CheckResult("optimal-deflection", err < 1e-12, f"max error {err:.2e}")


def _random_qubit_system(rng: np.random.Generator) -> PPSSystem:
    n = rng.normal(size=3)
    a = sum(c * s for c, s in zip(n / np.linalg.norm(n), (SIGMA_X, *_others())))
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    phi = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi, phi = psi / np.linalg.norm(psi), phi / np.linalg.norm(phi)
    return PPSSystem(np.outer(psi, psi.conj()), a, np.outer(phi, phi.conj()))


def _others():
    from .core import SIGMA_Y, SIGMA_Z

    return SIGMA_Y, SIGMA_Z


def _check_oracles(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(4):
        system = _random_qubit_system(rng)
        gm = GaussianMeter(rng.uniform(-0.5, 0.5), 0.0, 1.0, rng.uniform(0, 1))
        qm = QubitMeter.configuration(int(rng.integers(1, 8)))
        grid = GridMeterState.from_gaussian(gm)
        for gamma in (0.1, 0.5, 1.0, 2.0):
            ref = exact_pps_system(system.a, system.rho, system.e, gm, gamma).deflection
            got = grid_pps_average(system, grid, gamma, "q").deflection
            worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
            ref = exact_pps_system(system.a, system.rho, system.e, qm, gamma).deflection
            got = tensor_pps_average(system, MatrixMeter(*qm.operators()), gamma).deflection
            worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
            std = PPSSystem(system.rho, system.a, np.eye(2))
            ref = exact_standard_system(system.a, system.rho, gm, gamma) - gm.q_bar
            got = grid_pps_average(std, grid, gamma, "q").deflection
            worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    return CheckResult("oracle-equivalence", worst < 1e-6, f"max relative deviation {worst:.2e}")


def _check_figures() -> CheckResult:
    worst = 0.0
    for name in ("fig1", "fig2", "fig3", "fig7"):
        sc = preset(name)
        rows = run_scenario(sc)
        x = np.array([r[sc.parameter] for r in rows])
        mask = np.abs(x) <= 0.05 + 1e-12 if sc.parameter == "gamma" else np.ones(len(x), bool)
        for label in sc.spec["meters"]:
            nl = np.array([r[f"{label}.nonlinear"] for r in rows])[mask]
            ex = np.array([r[f"{label}.exact"] for r in rows])[mask]
            worst = max(worst, float(np.max(np.abs(nl - ex)) / np.max(np.abs(ex))))
    return CheckResult("figure-agreement", worst < 0.01, f"max error / max |exact| = {worst:.2e}")


def _check_interferometer() -> CheckResult:
    gamma, dq = 0.01, 1.0
    hi = interferometer_scenario(gamma, -2 * gamma * dq, dq, 1).q_s_small_angle
    lo = interferometer_scenario(gamma, 2 * gamma * dq, dq, 1).q_s_small_angle
    err = max(abs(hi - dq), abs(lo + dq))
    return CheckResult("interferometer-extremum", err < 1e-12, f"max error {err:.2e}")


def _random_meter(rng: np.random.Generator) -> MeterMoments:
    return MeterMoments.build(
        rng.uniform(-1, 1), rng.uniform(0.5, 2), 0.0, 3.0,
        complex(rng.uniform(-1, 1), rng.uniform(0.2, 1)), rng.uniform(-1, 1),
    )


def _check_inversion(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, done, tries = 0.0, 0, 0
    while done < 50 and tries < 1000:
        tries += 1
        m, m2 = _random_meter(rng), _random_meter(rng)
        aw = complex(*rng.normal(size=2)) * rng.uniform(1, 30)
        wv = WeakValueReport.pure(aw)
        span = abs(aw) * max(abs(m.f_bar) + m.delta_f, abs(m2.f_bar) + m2.delta_f)
        g = rng.uniform(0.05, 0.095) / span
        g2 = g * rng.uniform(0.3, 0.9)
        d1 = pps_deflection_nonlinear(g, wv, m).deflection
        d2 = pps_deflection_nonlinear(g2, wv, m2).deflection
        t0, t1 = rng.uniform(-math.pi, math.pi, size=2)
        if abs(math.sin(t0 - t1)) > 0.1:
            xi, xi1 = (aw * np.exp(1j * t0)).imag, (aw * np.exp(1j * t1)).imag
            worst = max(worst, abs(tomography_linear(xi, xi1, t0, t1) - aw) / abs(aw))
        gs = np.linspace(0, g, 64)[1:]
        ds = [pps_deflection_nonlinear(x, wv, m).deflection for x in gs]
        if np.all(np.diff(np.concatenate([[0.0], ds])) * np.sign(d1) > 0):
            worst = max(worst, abs(invert_gamma(d1, aw, m) - g) / g)
        try:
            got = tomography_nonlinear([TomographyInput(d1, g, m), TomographyInput(d2, g2, m2)])
        except AmbiguousRoot:
            continue
        worst = max(worst, abs(got - aw) / abs(aw))
        done += 1
    return CheckResult("inversion-round-trip", worst < 1e-9 and done == 50, f"{done} scenarios, max relative error {worst:.2e}")


CHECKS: dict[str, Callable[[int], CheckResult]] = {
    "threebox": lambda s: _check_threebox(),
    "qubit-weak-values": lambda s: _check_qubit_weak_values(),
    "optimal-deflection": lambda s: _check_optimal_deflection(),
    "oracle-equivalence": _check_oracles,
    "figure-agreement": lambda s: _check_figures(),
    "interferometer-extremum": lambda s: _check_interferometer(),
    "inversion-round-trip": _check_inversion,
}


def run_checks(seed: int = 0) -> list[CheckResult]:
    return [fn(seed) for fn in CHECKS.values()]
