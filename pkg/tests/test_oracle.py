"""Grid, tensor and Monte Carlo reference implementations."""

from __future__ import annotations

import math

import numpy as np
import pytest

from weakpps.core import SIGMA_X, SIGMA_Z, ProjectionValuedMeasure
from weakpps.engine import exact_pps_system, exact_standard_system
from weakpps.errors import DimensionMismatch, GridTooCoarse, InvalidOperator
from weakpps.meters import GaussianMeter, MatrixMeter, QubitMeter
from weakpps.oracle import (
    GridMeterState,
    PPSSystem,
    grid_density,
    grid_pps_average,
    mc_sample,
    tensor_distribution,
    tensor_pps_average,
)
from weakpps.weakvalues import abl_probabilities, weak_value_report

from conftest import projector, random_density, random_involution, random_ket

GAUSS = GaussianMeter(0.0, 0.0, 1.0, 0.0)


def _system(rng, pure=True) -> PPSSystem:
    rho = projector(random_ket(rng, 2)) if pure else random_density(rng, 2)
    return PPSSystem(rho, random_involution(rng), projector(random_ket(rng, 2)))


class TestGridState:
    def test_validation(self):
        with pytest.raises(InvalidOperator):
            GridMeterState(100, -1.0, 1.0, np.ones(100))
        with pytest.raises(InvalidOperator):
            GridMeterState(16, -1.0, 1.0, np.ones(16))

    def test_coarse_grid(self):
        with pytest.raises(GridTooCoarse):
            GridMeterState.from_gaussian(GAUSS, 1024, 2.0)

    def test_dual_grid_spacing(self):
        g = GridMeterState.from_gaussian(GAUSS, 64, 8.0)
        assert g.q[1] - g.q[0] == pytest.approx(2 * math.pi / 16.0)


class TestGrid:
    def test_zero_coupling(self, rng):
        grid = GridMeterState.from_gaussian(GaussianMeter(0.4, 0.0, 1.0, 0.0))
        out = grid_pps_average(_system(rng), grid, 0.0)
        assert out.r_s == pytest.approx(0.4, abs=1e-10)
        assert out.deflection == pytest.approx(0.0, abs=1e-12)

    def test_coinciding_closed_form(self):
        # A = sigma_x, pure states with an imaginary weak value
        psi = np.array([math.cos(0.3), 1j * math.sin(0.3)])
        phi = np.array([math.cos(1.1), math.sin(1.1)])
        wv = weak_value_report(SIGMA_X, psi, phi)
        grid = GridMeterState.from_gaussian(GaussianMeter(0.0, 0.0, 1.0, 0.0, "coinciding"))
        system = PPSSystem(projector(psi), SIGMA_X, projector(phi))
        for g in (0.05, 0.4, 1.3):
            expected = 4 * g * wv.a_w.imag / (1 - wv.a_w_11 + (1 + wv.a_w_11) * math.exp(2 * g * g))
            got = grid_pps_average(system, grid, g, "p").deflection
            assert got == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize("readout, role", [("p", "coinciding"), ("q", "conjugate")])
    def test_matches_exact(self, rng, readout, role):
        meter = GaussianMeter(0.2, 0.0, 0.8, 0.7, role)
        grid = GridMeterState.from_gaussian(meter)
        for _ in range(4):
            s = _system(rng, pure=False)
            for g in (0.1, 1.0, 2.0):
                ref = exact_pps_system(s.a, s.rho, s.e, meter, g).r_s
                assert grid_pps_average(s, grid, g, readout).r_s == pytest.approx(ref, rel=1e-6, abs=1e-9)

    def test_grid_convergence(self, rng):
        s = _system(rng)
        a = grid_pps_average(s, GridMeterState.from_gaussian(GAUSS, 2048), 0.7, "q").r_s
        b = grid_pps_average(s, GridMeterState.from_gaussian(GAUSS, 4096), 0.7, "q").r_s
        assert abs(a - b) < 1e-8

    def test_strong_coupling_abl_weights(self, rng):
        psi, phi = random_ket(rng, 2), random_ket(rng, 2)
        s = PPSSystem(projector(psi), SIGMA_Z, projector(phi))
        meter = GaussianMeter(0.0, 0.0, 4.0, 0.0)
        grid = GridMeterState.from_gaussian(meter, 8192, 10.0)
        x, dens, post = grid_density(s, grid, 3.0, "q")
        upper = dens[x > 0].sum() / post
        abl = abl_probabilities(ProjectionValuedMeasure.from_observable(SIGMA_Z), psi, phi).values
        assert upper == pytest.approx(abl[0], abs=1e-8)

    def test_unitarity(self, rng):
        s = _system(rng, pure=False)
        grid = GridMeterState.from_gaussian(GAUSS)
        rest = PPSSystem(s.rho, s.a, np.eye(2) - s.e)
        total = grid_pps_average(s, grid, 0.9).post_prob + grid_pps_average(rest, grid, 0.9).post_prob
        assert total == pytest.approx(1.0, abs=1e-6)


class TestTensor:
    def test_configuration_one_closed_form(self, rng):
        q = QubitMeter.configuration(1)
        mm = MatrixMeter(*q.operators())
        for _ in range(5):
            s = _system(rng, pure=False)
            for g in (0.1, 0.5, 1.0, 2.0):
                ref = exact_pps_system(s.a, s.rho, s.e, q, g).r_s
                assert tensor_pps_average(s, mm, g).r_s == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_identity_post_selection(self, rng):
        q = QubitMeter.configuration(3, 0.2, 0.9)
        mm = MatrixMeter(*q.operators())
        s = _system(rng, pure=False)
        std = PPSSystem(s.rho, s.a, np.eye(2))
        for g in (0.3, 2.0):
            assert tensor_pps_average(std, mm, g).r_s == pytest.approx(
                exact_standard_system(s.a, s.rho, q, g), abs=1e-12
            )

    def test_meter_in_eigenstate_of_f(self, rng):
        rho_m = np.diag([1.0, 0.0])
        mm = MatrixMeter(rho_m, SIGMA_Z, SIGMA_X)
        s = _system(rng)
        for g in (0.1, 1.0, 3.0):
            assert tensor_pps_average(s, mm, g).deflection == pytest.approx(0.0, abs=1e-12)

    def test_distribution_mean(self, rng):
        mm = MatrixMeter(*QubitMeter.configuration(4).operators())
        s = _system(rng)
        dist, post = tensor_distribution(s, mm, 0.8)
        out = tensor_pps_average(s, mm, 0.8)
        assert dist.mean() == pytest.approx(out.r_s, abs=1e-12)
        assert post == pytest.approx(out.post_prob, abs=1e-12)

    def test_dimension_cap(self, rng):
        big = np.eye(4096) / 4096
        with pytest.raises(DimensionMismatch):
            tensor_pps_average(_system(rng), MatrixMeter(big, np.eye(4096), np.eye(4096)), 0.1)


class TestMonteCarlo:
    @staticmethod
    def _quarter_system() -> PPSSystem:
        phi = np.array([math.cos(math.pi / 3), math.sin(math.pi / 3)])
        return PPSSystem(np.diag([1.0, 0.0]), SIGMA_X, projector(phi))

    def test_acceptance_rate(self):
        stats = mc_sample(self._quarter_system(), GridMeterState.from_gaussian(GAUSS, 1024), 0.0, 10**5, 7)
        assert stats.acceptance_rate == pytest.approx(0.25, abs=0.006)

    def test_deterministic(self, rng):
        s = _system(rng)
        grid = GridMeterState.from_gaussian(GAUSS, 1024)
        a = mc_sample(s, grid, 0.5, 200_000, 11)
        b = mc_sample(s, grid, 0.5, 200_000, 11)
        assert a == b

    def test_worker_independent(self, rng):
        s = _system(rng)
        grid = GridMeterState.from_gaussian(GAUSS, 1024)
        assert mc_sample(s, grid, 0.5, 200_000, 3, workers=1) == mc_sample(s, grid, 0.5, 200_000, 3, workers=4)

    def test_mean_within_stderr(self, rng):
        grid = GridMeterState.from_gaussian(GAUSS, 1024)
        hits = 0
        for seed in range(20):
            s = _system(rng)
            ref = grid_pps_average(s, grid, 0.6, "q").r_s
            st = mc_sample(s, grid, 0.6, 50_000, seed, readout="q")
            hits += abs(st.mean - ref) <= 4 * st.stderr
        assert hits >= 19

    def test_discrete_meter(self, rng):
        mm = MatrixMeter(*QubitMeter.configuration(4).operators())
        s = _system(rng)
        ref = tensor_pps_average(s, mm, 0.8)
        st = mc_sample(s, mm, 0.8, 100_000, 5)
        assert abs(st.mean - ref.r_s) <= 4 * st.stderr
        assert st.acceptance_rate == pytest.approx(ref.post_prob, abs=5 * math.sqrt(0.25 / 1e5))

    def test_snr_matches_formula(self, rng):
        # coinciding Gaussian: SNR = deflection sqrt(accepted) / delta_R_s
        meter = GaussianMeter(0.0, 0.0, 1.0, 0.0, "coinciding")
        grid = GridMeterState.from_gaussian(meter, 1024)
        psi = np.array([math.cos(0.7), 1j * math.sin(0.7)])
        s = PPSSystem(projector(psi), SIGMA_X, projector(np.array([1.0, 0.0])))
        ref = grid_pps_average(s, grid, 0.2)
        st = mc_sample(s, grid, 0.2, 200_000, 9)
        assert st.snr() == pytest.approx(abs(ref.deflection) * math.sqrt(st.n_accepted) / st.std, rel=0.1)
        assert st.mean == pytest.approx(ref.r_s, abs=4 * st.stderr)

    def test_rejects_empty(self, rng):
        with pytest.raises(InvalidOperator):
            mc_sample(_system(rng), GridMeterState.from_gaussian(GAUSS, 1024), 0.1, 0, 1)
