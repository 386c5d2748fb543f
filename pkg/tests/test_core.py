"""Linear-algebra primitives and state constructors."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakpps.core import (
    SIGMA_X,
    SIGMA_Z,
    DensityMatrix,
    Ket,
    Observable,
    PovmElement,
    ProjectionValuedMeasure,
    bloch_components,
    bloch_ket,
    bloch_state,
    expectation,
    hermitian_expm,
    matrix_from_json,
    matrix_to_json,
    spectral_decomposition,
)
from weakpps.errors import DimensionMismatch, InvalidOperator

from conftest import random_density, random_hermitian


class TestKet:
    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidOperator):
            Ket(np.array([1.0, 1.0]))

    def test_rejects_dimension_one(self):
        with pytest.raises(InvalidOperator):
            Ket(np.array([1.0]))

    def test_normalized_constructor(self):
        k = Ket.normalized([1, 1j])
        np.testing.assert_allclose(np.linalg.norm(k.amplitudes), 1.0)
        assert k.dim == 2

    def test_amplitudes_are_read_only(self):
        k = Ket.normalized([1, 0])
        with pytest.raises(ValueError):
            k.amplitudes[0] = 2


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidOperator):
            DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_rejects_bad_trace(self):
        with pytest.raises(InvalidOperator):
            DensityMatrix(np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidOperator):
            DensityMatrix(np.diag([1.2, -0.2]))

    def test_spectrum_descending(self, rng):
        rho = DensityMatrix(random_density(rng, 4))
        w, v = rho.spectrum()
        assert np.all(np.diff(w) <= 0)
        np.testing.assert_allclose((v * w) @ v.conj().T, rho.matrix, atol=1e-12)


class TestOperators:
    def test_observable_rejects_non_hermitian(self):
        with pytest.raises(InvalidOperator):
            Observable(np.array([[0, 1], [0, 0]]))

    def test_povm_element_spectrum_bounds(self):
        with pytest.raises(InvalidOperator):
            PovmElement(np.diag([1.5, 0.0]))
        PovmElement(np.diag([1.0, 0.0]))

    def test_pvm_checks(self):
        p = np.diag([1.0, 0.0])
        ProjectionValuedMeasure((p, np.eye(2) - p), (1.0, -1.0))
        with pytest.raises(InvalidOperator):
            ProjectionValuedMeasure((p, np.eye(2) - p), (1.0, 1.0))
        with pytest.raises(InvalidOperator):
            ProjectionValuedMeasure((p, p), (1.0, 0.0))

    def test_pvm_from_observable_groups_degenerate(self):
        pvm = ProjectionValuedMeasure.from_observable(np.diag([1.0, 1.0, -1.0]))
        assert pvm.eigenvalues == (1.0, -1.0)
        np.testing.assert_allclose(pvm.observable(), np.diag([1.0, 1.0, -1.0]), atol=1e-12)


class TestExpectation:
    def test_eigenstate(self):
        assert expectation(SIGMA_Z, np.diag([1.0, 0.0])) == pytest.approx(1.0)

    def test_maximally_mixed(self):
        assert abs(expectation(SIGMA_X, np.eye(2) / 2)) < 1e-15

    def test_three_box_overlap(self):
        psi = np.array([1, 1, 1]) / math.sqrt(3)
        phi = np.array([1, 1, -1]) / math.sqrt(3)
        assert expectation(np.outer(phi, phi), np.outer(psi, psi)).real == pytest.approx(1 / 9, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            expectation(np.eye(2), np.eye(3) / 3)


class TestHermitianExpm:
    def test_diagonal(self):
        u = hermitian_expm(SIGMA_Z, math.pi / 2)
        np.testing.assert_allclose(u, np.diag([np.exp(-0.5j * math.pi), np.exp(0.5j * math.pi)]), atol=1e-15)

    def test_zero_scale(self):
        np.testing.assert_allclose(hermitian_expm(SIGMA_X, 0.0), np.eye(2), atol=1e-15)

    def test_tensor_involution(self):
        xx = np.kron(SIGMA_X, SIGMA_X)
        expected = math.cos(0.3) * np.eye(4) - 1j * math.sin(0.3) * xx
        np.testing.assert_allclose(hermitian_expm(xx, 0.3), expected, atol=1e-14)

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidOperator):
            hermitian_expm(np.array([[0, 1], [0, 0]]), 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.floats(-5, 5))
    def test_unitary(self, seed, d, scale):
        u = hermitian_expm(random_hermitian(np.random.default_rng(seed), d), scale)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(d), atol=1e-10)


class TestBloch:
    def test_poles_and_equator(self):
        np.testing.assert_allclose(bloch_state(0, 0).matrix, np.diag([1, 0]), atol=1e-15)
        np.testing.assert_allclose(bloch_state(math.pi / 2, 0).matrix, np.full((2, 2), 0.5), atol=1e-15)

    def test_mixed_eigenvalues(self):
        w = np.linalg.eigvalsh(bloch_state(math.pi / 3, math.pi / 4, 0.5).matrix)
        np.testing.assert_allclose(w, [0.25, 0.75], atol=1e-15)

    def test_pure_matches_ket(self):
        k = bloch_ket(1.1, -0.4)
        np.testing.assert_allclose(bloch_state(1.1, -0.4).matrix, k.projector(), atol=1e-15)

    def test_purity_out_of_range(self):
        with pytest.raises(InvalidOperator):
            bloch_state(0.1, 0.0, 1.5)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, math.pi), st.floats(-math.pi, math.pi), st.floats(0, 1))
    def test_purity_and_gap(self, kappa, nu, p):
        rho = bloch_state(kappa, nu, p)
        assert rho.purity() == pytest.approx((1 + p * p) / 2, abs=1e-12)
        w = np.linalg.eigvalsh(rho.matrix)
        assert w[1] - w[0] == pytest.approx(p, abs=1e-12)
        np.testing.assert_allclose(np.linalg.norm(bloch_components(rho)), p, atol=1e-12)


class TestSpectral:
    def test_reconstructs(self, rng):
        h = random_hermitian(rng, 5)
        w, v = spectral_decomposition(h)
        np.testing.assert_allclose((v * w) @ v.conj().T, h, atol=1e-12)
        assert np.all(np.diff(w) <= 0)

    def test_deterministic(self, rng):
        h = random_hermitian(rng, 4)
        a, b = spectral_decomposition(h), spectral_decomposition(h.copy())
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


class TestJson:
    def test_round_trip(self, rng):
        m = random_hermitian(rng, 3)
        np.testing.assert_array_equal(matrix_from_json(matrix_to_json(m)), m)

    def test_real_entries(self):
        np.testing.assert_array_equal(matrix_from_json([[1, 0], [0, -1]]), SIGMA_Z)
