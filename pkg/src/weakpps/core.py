"""Finite-dimensional state and operator primitives.

Every wrapper type stores a read-only complex array and checks its
invariants at construction. Functions accept either the wrapper or a raw
array-like, so callers working with plain numpy do not pay for the types.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InvalidOperator

EPS_NORM = 1e-12
EPS_HERM = 1e-12
EPS_UNIT = 1e-10
EPS_PSD = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def _scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0


def _square(m: np.ndarray, name: str) -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidOperator(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def is_hermitian(m: np.ndarray, tol: float = EPS_HERM) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol * _scale(m))


@dataclass(frozen=True)
class Ket:
    """Normalized state vector of a d-level system (d >= 2)."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size < 2:
            raise InvalidOperator("a ket needs dimension d >= 2")
        if abs(np.vdot(v, v).real - 1.0) > EPS_NORM * 10:
            raise InvalidOperator(f"ket norm^2 = {np.vdot(v, v).real!r}, expected 1")
        object.__setattr__(self, "amplitudes", _frozen(v))

    @classmethod
    def normalized(cls, amplitudes: Sequence[complex] | np.ndarray) -> "Ket":
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise InvalidOperator("cannot normalize the zero vector")
        return cls(v / n)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector())


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _square(np.asarray(self.matrix, dtype=complex), "density matrix")
        if not is_hermitian(m):
            raise InvalidOperator("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > EPS_NORM * 10:
            raise InvalidOperator(f"density matrix trace = {np.trace(m).real!r}")
        if np.min(np.linalg.eigvalsh(m)) < -EPS_PSD:
            raise InvalidOperator("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        return spectral_decomposition(self.matrix)


@dataclass(frozen=True)
class Observable:
    """Hermitian operator of a measured quantity."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _square(np.asarray(self.matrix, dtype=complex), "observable")
        if not is_hermitian(m):
            raise InvalidOperator("observable is not Hermitian")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PovmElement:
    """Effect operator: Hermitian with spectrum inside [0, 1]."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _square(np.asarray(self.matrix, dtype=complex), "POVM element")
        if not is_hermitian(m):
            raise InvalidOperator("POVM element is not Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev[0] < -EPS_PSD or ev[-1] > 1.0 + EPS_PSD:
            raise InvalidOperator("POVM element spectrum leaves [0, 1]")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def projector_onto(cls, ket: Ket | Sequence[complex] | np.ndarray) -> "PovmElement":
        k = ket if isinstance(ket, Ket) else Ket.normalized(ket)
        return cls(k.projector())

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ProjectionValuedMeasure:
    """Orthogonal resolution of the identity with distinct eigenvalue labels."""

    projectors: tuple[np.ndarray, ...]
    eigenvalues: tuple[float, ...]

    def __post_init__(self) -> None:
        projs = tuple(_frozen(_square(np.asarray(p, dtype=complex), "projector")) for p in self.projectors)
        vals = tuple(float(a) for a in self.eigenvalues)
        if len(projs) != len(vals) or not projs:
            raise InvalidOperator("need one eigenvalue per projector")
        if len(set(vals)) != len(vals):
            raise InvalidOperator("PVM eigenvalues must be pairwise distinct")
        d = projs[0].shape[0]
        if any(p.shape != (d, d) for p in projs):
            raise DimensionMismatch("projectors differ in dimension")
        stack = np.stack(projs)
        # P_i P_j = delta_ij P_i for all pairs at once
        target = np.eye(len(projs))[:, :, None, None] * stack[:, None]
        if np.max(np.abs(np.einsum("iab,jbc->ijac", stack, stack) - target)) > EPS_HERM * 10:
            raise InvalidOperator("projectors are not mutually orthogonal idempotents")
        if np.max(np.abs(stack.sum(axis=0) - np.eye(d))) > EPS_NORM * 10:
            raise InvalidOperator("projectors do not sum to the identity")
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "eigenvalues", vals)

    @classmethod
    def from_observable(cls, a: Observable | np.ndarray, decimals: int = 9) -> "ProjectionValuedMeasure":
        """Group eigenvectors of a Hermitian matrix by (rounded) eigenvalue."""
        m = as_matrix(a)
        w, v = np.linalg.eigh(m)
        groups: dict[float, list[int]] = {}
        for idx, val in enumerate(np.round(w, decimals)):
            groups.setdefault(float(val), []).append(idx)
        projs, vals = [], []
        for val in sorted(groups, reverse=True):
            cols = v[:, groups[val]]
            projs.append(cols @ cols.conj().T)
            vals.append(float(np.mean(w[groups[val]])))
        return cls(tuple(projs), tuple(vals))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def observable(self) -> np.ndarray:
        return sum(a * p for a, p in zip(self.eigenvalues, self.projectors))


MatrixLike = Union[np.ndarray, Ket, DensityMatrix, Observable, PovmElement, Sequence]


def as_matrix(x: MatrixLike) -> np.ndarray:
    """Return the square complex matrix behind any supported input.

    Kets are promoted to their projector.
    """
    if isinstance(x, Ket):
        return x.projector()
    if isinstance(x, (DensityMatrix, Observable, PovmElement)):
        return x.matrix
    m = np.asarray(x, dtype=complex)
    if m.ndim == 1:
        return np.outer(m, m.conj())
    return _square(m, "operator")


def check_same_dim(*ms: np.ndarray) -> int:
    dims = {m.shape[0] for m in ms}
    if len(dims) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def expectation(op: MatrixLike, state: MatrixLike) -> complex:
    """Tr(op state)."""
    o, s = as_matrix(op), as_matrix(state)
    check_same_dim(o, s)
    return complex(np.einsum("ij,ji->", o, s))


def spectral_decomposition(m: MatrixLike) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian matrix, eigenvalues descending.

    Ties keep the order returned by the solver's ascending output, so the
    result is deterministic for a fixed input.
    """
    h = as_matrix(m)
    if not is_hermitian(h):
        raise InvalidOperator("spectral decomposition needs a Hermitian matrix")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def hermitian_expm(generator: MatrixLike, scale: float) -> np.ndarray:
    """exp(-i * scale * generator) via eigendecomposition."""
    g = as_matrix(generator)
    if not is_hermitian(g):
        raise InvalidOperator("generator is not Hermitian")
    w, v = np.linalg.eigh((g + g.conj().T) / 2)
    return (v * np.exp(-1j * scale * w)) @ v.conj().T


def bloch_vector(kappa: float, nu: float) -> np.ndarray:
    """Unit vector with polar angle kappa and azimuth nu."""
    return np.array(
        [np.sin(kappa) * np.cos(nu), np.sin(kappa) * np.sin(nu), np.cos(kappa)]
    )


def sigma_dot(n: Iterable[float]) -> np.ndarray:
    n = np.asarray(list(n), dtype=float)
    return n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z


def bloch_ket(kappa: float, nu: float) -> Ket:
    """cos(kappa/2)|+z> + exp(i nu) sin(kappa/2)|-z>."""
    return Ket(np.array([np.cos(kappa / 2), np.exp(1j * nu) * np.sin(kappa / 2)]))


def bloch_state(kappa: float, nu: float, p_in: float = 1.0) -> DensityMatrix:
    """(I + p_in sigma.n(kappa, nu)) / 2."""
    if not 0.0 <= p_in <= 1.0:
        raise InvalidOperator(f"purity p_in={p_in!r} outside [0, 1]")
    if not 0.0 <= kappa <= np.pi:
        raise InvalidOperator(f"kappa={kappa!r} outside [0, pi]")
    return DensityMatrix((IDENTITY_2 + p_in * sigma_dot(bloch_vector(kappa, nu))) / 2)


def bloch_components(rho: MatrixLike) -> np.ndarray:
    """Pseudospin vector Tr(rho sigma) of a qubit operator."""
    m = as_matrix(rho)
    if m.shape != (2, 2):
        raise DimensionMismatch("Bloch components need a 2x2 operator")
    return np.array([np.real(np.trace(m @ s)) for s in PAULI])


def matrix_to_json(m: np.ndarray) -> list:
    """Row-major nested list of [re, im] pairs."""
    a = np.asarray(m, dtype=complex)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(data: Sequence, ndim: int = 2) -> np.ndarray:
    """Inverse of matrix_to_json for an array of the given rank.

    Entries may be [re, im] pairs or plain real numbers.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == ndim:
        return arr.astype(complex)
    raise InvalidOperator(f"cannot read a rank-{ndim} complex array from shape {arr.shape}")
