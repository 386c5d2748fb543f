"""End-to-end acceptance criteria, one recorded PASS/FAIL line each.

Each test records its line through the ``record`` fixture before asserting,
so the terminal summary lists every criterion even when some fail.
"""

from __future__ import annotations

import math
import time
import timeit

import numpy as np
import pytest

from weakpps.core import SIGMA_X, bloch_state
from weakpps.engine import (
    exact_pps_system,
    exact_standard_system,
    mu_w,
    nonlinear_system,
    pps_deflection_linear,
    pps_deflection_nonlinear,
)
from weakpps.meters import GaussianMeter, MatrixMeter, QubitMeter, moments_gaussian
from weakpps.metrology import (
    INTERFEROMETER_OBSERVABLE,
    TomographyInput,
    interferometer_meter,
    interferometer_scenario,
    interferometer_states,
    invert_gamma,
    linear_reading,
    tomography_linear,
    tomography_nonlinear,
)
from weakpps.oracle import GridMeterState, PPSSystem, grid_pps_average, mc_sample, tensor_pps_average
from weakpps.scenarios import PRESETS, preset, run_scenario
from weakpps.verify import threebox_tables
from weakpps.weakvalues import WeakValueReport, associated_weak_value, weak_value

import test_invariants as inv
from conftest import projector, random_density, random_involution, random_ket, random_unit

DOWN = np.diag([0.0, 1.0])


class TestThreeBox:
    def test_criterion_1(self, record):
        rows = {r["measurement"]: r for r in threebox_tables()}
        abl = [rows[f"box{i}-vs-rest"]["abl_in_box"] for i in (1, 2, 3)]
        full = [rows[f"all-boxes:box{i}"]["abl_in_box"] for i in (1, 2, 3)]
        weak = [rows[f"box{i}-vs-rest"]["weak_in_box"] for i in (1, 2, 3)]
        err = max(
            np.max(np.abs(np.subtract(abl, [1, 1, 0.2]))),
            np.max(np.abs(np.subtract(full, [1 / 3] * 3))),
            np.max(np.abs(np.subtract(weak, [1, 1, -1]))),
        )
        seconds = min(timeit.repeat(threebox_tables, number=1, repeat=200))
        ok = record(1, err <= 1e-12 and seconds < 1e-3, f"max error {err:.1e}, runtime {seconds * 1e3:.3f} ms")
        assert ok


class TestQubitWeakValues:
    P_IN = 0.99

    def test_criterion_2(self, record):
        grid_err = 0.0
        for kappa in np.linspace(0.1, 3.0, 10):
            for nu in np.linspace(-3.0, 3.0, 10):
                aw = weak_value(SIGMA_X, bloch_state(kappa, nu).matrix, DOWN)
                expected = np.exp(-1j * nu) / math.tan(kappa / 2)
                grid_err = max(grid_err, abs(aw - expected) / abs(expected))

        def modulus(k: float) -> float:
            return abs(weak_value(SIGMA_X, bloch_state(k, 0.0, self.P_IN).matrix, DOWN))

        # coarse scan, then golden-section refinement of the peak
        ks = np.linspace(1e-4, 0.6, 6001)
        i = int(np.argmax([modulus(k) for k in ks]))
        lo, hi = ks[max(i - 1, 0)], ks[min(i + 1, len(ks) - 1)]
        r = (math.sqrt(5) - 1) / 2
        while hi - lo > 1e-10:
            a, b = hi - r * (hi - lo), lo + r * (hi - lo)
            lo, hi = (a, hi) if modulus(a) < modulus(b) else (lo, b)
        k_star = (lo + hi) / 2
        peak = modulus(k_star)
        a11 = associated_weak_value(SIGMA_X, bloch_state(0.0, 0.0, self.P_IN).matrix, DOWN)

        checks = {
            "grid": grid_err <= 1e-12,
            "peak": abs(peak - math.sqrt(50)) <= 1e-6 and abs(k_star - math.sqrt(0.02)) <= 1e-6,
            "a11": abs(a11 - 200) <= 1e-12 * 200,
        }
        detail = (
            f"grid rel err {grid_err:.1e}; max|A_w| {peak:.6f} at kappa {k_star:.6f} "
            f"(target {math.sqrt(50):.6f} at {math.sqrt(0.02):.6f}); A11(0) {a11:.10g} (target 200)"
        )
        failed = [k for k, v in checks.items() if not v]
        ok = record(2, not failed, detail + (f"; failed: {', '.join(failed)}" if failed else ""))
        # exact closed forms for purity P: peak P/sqrt(1-P^2) at cos(kappa) = P, A11(0) = (1+P)/(1-P)
        p = self.P_IN
        np.testing.assert_allclose(peak, p / math.sqrt(1 - p * p), rtol=1e-9)
        np.testing.assert_allclose(k_star, math.acos(p), atol=1e-6)
        np.testing.assert_allclose(a11, (1 + p) / (1 - p), rtol=1e-12)
        assert ok


class TestOptimalDeflection:
    def test_criterion_3(self, record):
        worst = 0.0
        for b in (0.0, 1.0, 3.0):
            for dp in (0.5, 1.0, 2.0):
                g = 0.01
                wv = WeakValueReport.pure((1 + 1j * b) / (dp * math.sqrt(1 + b * b)) / g)
                d = pps_deflection_nonlinear(g, wv, moments_gaussian(GaussianMeter(0.0, 0.0, dp, b))).deflection
                target = math.sqrt(1 + b * b) / (2 * dp)
                worst = max(worst, abs(d - target) / target)
        ok = record(3, worst <= 1e-12, f"b in {{0,1,3}}, dp in {{0.5,1,2}}: max rel err {worst:.1e}")
        assert ok


class TestFigures:
    NEAR_CANCEL = "R=p,pbar=10"

    @staticmethod
    def _labels(rows: list[dict]) -> list[str]:
        return sorted({k.rsplit(".", 1)[0] for k in rows[0] if k.endswith(".exact")})

    @staticmethod
    def _rel(rows: list[dict], label: str) -> float:
        ex = np.array([r[f"{label}.exact"] for r in rows])
        nl = np.array([r[f"{label}.nonlinear"] for r in rows])
        return float(np.max(np.abs(nl - ex)) / np.max(np.abs(ex)))

    def test_criterion_4(self, record):
        start = time.perf_counter()
        worst, worst_at, cancel, problems = 0.0, "", 0.0, []
        for name in ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"):
            sc = preset(name)
            rows = run_scenario(sc)
            if len(rows) != PRESETS[name]["sweep"]["steps"]:
                problems.append(f"{name} row count")
            if any(r["error"] for r in rows):
                problems.append(f"{name} errors")
            if name == "fig6":
                if not all(math.isfinite(r["a_w_abs"]) for r in rows):
                    problems.append("fig6 non-finite")
                continue
            if "gamma" in rows[0]:
                rows = [r for r in rows if abs(r["gamma"]) <= 0.05 + 1e-12]
            for label in self._labels(rows):
                if name == "fig5" and label == self.NEAR_CANCEL:
                    near = [r for r in rows if abs(r["system.theta"] + math.pi / 2) <= 0.1]
                    ex = max(abs(r[f"{label}.exact"]) for r in rows)
                    cancel = max(abs(r[f"{label}.nonlinear"] - r[f"{label}.exact"]) for r in near) / ex
                    continue
                rel = self._rel(rows, label)
                if rel > worst:
                    worst, worst_at = rel, f"{name} {label}"
        seconds = time.perf_counter() - start
        ok = worst <= 0.01 and cancel > 0.01 and seconds < 10 and not problems
        record(
            4,
            ok,
            f"max nonlinear-vs-exact {worst:.2%} ({worst_at}); fig5 {self.NEAR_CANCEL} near -pi/2 "
            f"{cancel:.2%} (> 1% required); {seconds:.1f} s" + (f"; {problems}" if problems else ""),
        )
        assert ok


class TestInterferometerAcceptance:
    GAMMA, PHI, DQ, N, SEED = 0.25, 0.05, 1.0, 10**6, 2024

    def test_criterion_5(self, record):
        start = time.perf_counter()
        ext = 0.0
        for g, dq in ((0.01, 1.0), (0.003, 2.0), (-0.02, 0.5), (0.05, 1.0)):
            for sign in (1, -1):
                r = interferometer_scenario(g, -sign * 2 * g * dq, dq, 1)
                ext = max(ext, abs(r.q_s_small_angle - sign * dq))
        psi, post = interferometer_states(self.PHI)
        system = PPSSystem(projector(psi.amplitudes), INTERFEROMETER_OBSERVABLE, projector(post.amplitudes))
        grid = GridMeterState.from_gaussian(interferometer_meter(self.DQ))
        stats = mc_sample(system, grid, self.GAMMA, self.N, self.SEED, readout="p")
        split = mc_sample(system, grid, self.GAMMA, self.N, self.SEED, readout="p", statistic=np.sign)
        rep = interferometer_scenario(self.GAMMA, self.PHI, self.DQ, self.N)
        mc, mc_split = stats.snr(), split.snr()
        seconds = time.perf_counter() - start
        weak_ok = abs(mc - rep.snr_weak) <= 0.1 * rep.snr_weak
        exact_ok = abs(mc - rep.snr_exact) <= 0.1 * rep.snr_exact
        ok = ext <= 1e-12 and weak_ok and seconds < 30
        record(
            5,
            ok,
            f"extremum err {ext:.1e}; MC SNR {mc:.2f} vs 3^(-1/4)|phi|sqrt(N) {rep.snr_weak:.2f} "
            f"({'ok' if weak_ok else 'off by ' + format(mc / rep.snr_weak - 1, '.0%')}), "
            f"vs exact {rep.snr_exact:.2f} ({'ok' if exact_ok else 'off'}), "
            f"3^(-1/2) form {3**-0.5 * self.PHI * math.sqrt(self.N):.2f}; split MC {mc_split:.2f} "
            f"vs sqrt(2/pi) ref {rep.snr_split:.2f}; homodyne ref {rep.snr_homodyne:.2f}; {seconds:.2f} s",
        )
        assert ext <= 1e-12 and exact_ok
        assert ok


def _centered_meter(rng: np.random.Generator, family: str):
    if family == "gaussian-conjugate":
        return GaussianMeter(0.0, 0.0, rng.uniform(0.5, 2.0), rng.uniform(-2, 2))
    if family == "gaussian-coinciding":
        return GaussianMeter(0.0, 0.0, rng.uniform(0.5, 2.0), 0.0, "coinciding")
    # qubit meter with F_bar = 0: Bloch vector orthogonal to the F axis
    n_f = random_unit(rng)
    s = np.cross(n_f, random_unit(rng))
    s *= rng.uniform(0.1, 0.9) / np.linalg.norm(s)
    return QubitMeter(tuple(n_f), tuple(random_unit(rng)), 0.0, tuple(s))


class TestConvergenceOrder:
    FAMILIES = ("gaussian-conjugate", "gaussian-coinciding", "qubit")
    GAMMAS = (0.05, 0.025, 0.0125, 0.00625)

    def test_criterion_6(self, record):
        rng = np.random.default_rng(6)
        summary, ok = [], True
        for family in self.FAMILIES:
            ratios = []
            for _ in range(50):
                a, rho, e = random_involution(rng), projector(random_ket(rng, 2)), projector(random_ket(rng, 2))
                m = _centered_meter(rng, family)
                err = [
                    abs(exact_pps_system(a, rho, e, m, g).deflection - nonlinear_system(a, rho, e, m, g).deflection)
                    for g in self.GAMMAS
                ]
                ratios += [err[i] / err[i + 1] for i in range(3)]
            ratios = np.array(ratios)
            ok &= bool(np.all(ratios >= 8))
            summary.append(
                f"{family} min {ratios.min():.2f} median {np.median(ratios):.3f} "
                f"({np.mean(ratios >= 8):.0%} >= 8)"
            )
        record(6, ok, "per-halving error ratio: " + "; ".join(summary))
        assert ok


def _oracle_scenarios(rng: np.random.Generator, n: int = 20):
    for _ in range(n):
        rho = random_density(rng, 2, int(rng.integers(1, 3)))
        yield PPSSystem(rho, random_involution(rng), projector(random_ket(rng, 2)))


class TestOracleEquivalence:
    GAMMAS = (0.1, 0.5, 1.0, 2.0)

    @staticmethod
    def _rel(got: float, ref: float) -> float:
        # relative to the unit pointer width when the mean itself is near zero
        return abs(got - ref) / max(abs(ref), 1.0)

    def test_criterion_7(self, record):
        rng = np.random.default_rng(7)
        grids = {
            "p": (m := GaussianMeter(0.2, 0.0, 0.8, 0.0, "coinciding"), GridMeterState.from_gaussian(m)),
            "q": (m2 := GaussianMeter(0.2, 0.0, 0.8, 0.7), GridMeterState.from_gaussian(m2)),
        }
        worst = {"grid": 0.0, "tensor": 0.0, "grid E=I": 0.0, "tensor E=I": 0.0}
        for s in _oracle_scenarios(rng):
            q = QubitMeter(tuple(random_unit(rng)), tuple(random_unit(rng)), rng.normal(), tuple(random_unit(rng) * 0.8))
            mm = MatrixMeter(*q.operators())
            std = PPSSystem(s.rho, s.a, np.eye(2))
            for g in self.GAMMAS:
                for readout, (meter, grid) in grids.items():
                    ref = exact_pps_system(s.a, s.rho, s.e, meter, g).r_s
                    worst["grid"] = max(worst["grid"], self._rel(grid_pps_average(s, grid, g, readout).r_s, ref))
                    ref = exact_standard_system(s.a, s.rho, meter, g)
                    got = grid_pps_average(std, grid, g, readout).r_s
                    worst["grid E=I"] = max(worst["grid E=I"], self._rel(got, ref))
                ref = exact_pps_system(s.a, s.rho, s.e, q, g).r_s
                worst["tensor"] = max(worst["tensor"], self._rel(tensor_pps_average(s, mm, g).r_s, ref))
                ref = exact_standard_system(s.a, s.rho, q, g)
                worst["tensor E=I"] = max(worst["tensor E=I"], self._rel(tensor_pps_average(std, mm, g).r_s, ref))
        ok = record(7, max(worst.values()) <= 1e-6, "max rel err " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
        assert ok


class TestInvariantSuites:
    def test_criterion_8(self, record):
        rng = np.random.default_rng(8)
        n = 1000
        counts = {
            "cauchy-schwarz": inv.cauchy_schwarz_failures(rng, n),
            "normalization": inv.normalization_failures(rng, n),
            "sum rule": inv.sum_rule_failures(rng, n),
            "uncertainty": sum(inv.uncertainty_failures(rng, n).values()),
            "input offset": inv.input_offset_failures(rng, n),
            "meter unitary": inv.meter_unitary_failures(rng, n),
            "quadratic phase": inv.quadratic_phase_failures(rng, n),
            "time symmetry": inv.time_symmetry_failures(rng, n) + inv.pure_swap_failures(rng, n),
        }
        ok = record(
            8, not any(counts.values()), f"{n} cases per suite, failures: " + ", ".join(f"{k} {v}" for k, v in counts.items())
        )
        assert ok


class TestInversion:
    def test_criterion_9(self, record):
        rng = np.random.default_rng(9)
        worst = {"invert_gamma": 0.0, "linear": 0.0, "nonlinear": 0.0}
        planted = 0
        while planted < 100:
            m = moments_gaussian(GaussianMeter(rng.uniform(-1, 1), 0.0, rng.uniform(0.5, 2), rng.uniform(-2, 2)))
            aw = complex(rng.normal(), rng.normal()) * 5
            g = 0.05 * rng.uniform(0.1, 1.0) / (abs(aw) * (abs(m.f_bar) + m.delta_f))
            wv = WeakValueReport.pure(aw)
            # only couplings where D(gamma) is monotone on [0, g] are identifiable from D
            curve = [pps_deflection_nonlinear(x, wv, m).deflection for x in np.linspace(0, g, 201)]
            if not (np.all(np.diff(curve) > 0) or np.all(np.diff(curve) < 0)):
                continue
            planted += 1
            got = invert_gamma(pps_deflection_nonlinear(g, wv, m).deflection, wv, m)
            worst["invert_gamma"] = max(worst["invert_gamma"], abs(got - g) / g)
        for _ in range(100):
            aw = complex(rng.normal(), rng.normal()) * 10
            dp = rng.uniform(0.5, 2)
            m1 = moments_gaussian(GaussianMeter(0.0, 0.0, dp, rng.uniform(-2, 2)))
            m2 = moments_gaussian(GaussianMeter(0.0, 0.0, dp, 0.0, "coinciding"))
            g = 1e-3 / abs(aw)
            (x1, t1), (x2, t2) = (linear_reading(pps_deflection_linear(g, aw, m), g, m) for m in (m1, m2))
            worst["linear"] = max(worst["linear"], abs(tomography_linear(x1, x2, t1, t2) - aw) / abs(aw))
        for _ in range(100):
            aw = complex(rng.normal(), rng.normal()) * 10
            b1, b2 = rng.uniform(0.3, 2), -rng.uniform(0.3, 2)
            ms = [moments_gaussian(GaussianMeter(0.0, 0.0, 1.0, b)) for b in (b1, b2)]
            g = 0.03 / abs(aw)
            assert all(mu_w(g, aw, m) < 0.1 for m in ms)
            readings = [
                TomographyInput(pps_deflection_nonlinear(g, WeakValueReport.pure(aw), m).deflection, g, m) for m in ms
            ]
            worst["nonlinear"] = max(worst["nonlinear"], abs(tomography_nonlinear(readings) - aw) / abs(aw))
        ok = record(9, max(worst.values()) <= 1e-9, "max rel err " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
        assert ok
