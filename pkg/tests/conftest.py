"""Shared random generators for system and meter scenarios."""

from __future__ import annotations

import numpy as np
import pytest

from weakpps.core import PAULI


def random_ket(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    r = g @ g.conj().T
    return r / np.trace(r).real


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def random_effect(rng: np.random.Generator, d: int) -> np.ndarray:
    """Random POVM element with spectrum in (0, 1]."""
    h = random_hermitian(rng, d)
    w, v = np.linalg.eigh(h)
    w = rng.uniform(0.05, 1.0, size=d)
    return (v * w) @ v.conj().T


def random_unit(rng: np.random.Generator) -> np.ndarray:
    n = rng.normal(size=3)
    return n / np.linalg.norm(n)


def random_involution(rng: np.random.Generator) -> np.ndarray:
    """sigma . n for a random unit vector n (A^2 = I)."""
    return sum(c * s for c, s in zip(random_unit(rng), PAULI))


def projector(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """record(n, passed, detail) stores one acceptance line for the summary."""

    def _record(n: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[n] = (bool(passed), detail)
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
