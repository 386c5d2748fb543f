"""Weak values, weak probabilities and conditional strong-measurement probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    EPS_HERM,
    EPS_NORM,
    MatrixLike,
    ProjectionValuedMeasure,
    as_matrix,
    check_same_dim,
)
from .errors import InvalidOperator, VanishingPostSelection

EPS_REL = 1e-9
MAX_ORDER = 8


def overlap_threshold(rho: np.ndarray, e: np.ndarray) -> float:
    """Smallest Tr(E rho) treated as a non-empty post-selected ensemble."""
    # trace norms: both operators are positive, so this is just the traces
    return 1e-14 * abs(np.trace(e).real) * abs(np.trace(rho).real)


def post_selection_probability(rho: MatrixLike, e: MatrixLike) -> float:
    """Tr(E rho) with a vanishing-ensemble check."""
    r, em = as_matrix(rho), as_matrix(e)
    check_same_dim(r, em)
    p = float(np.real(np.einsum("ij,ji->", em, r)))
    if p <= overlap_threshold(r, em):
        raise VanishingPostSelection(f"Tr(E rho) = {p!r}: pre- and post-selection are orthogonal")
    return p


def _trace(*ms: np.ndarray) -> complex:
    out = ms[0]
    for m in ms[1:]:
        out = out @ m
    return complex(np.trace(out))


@dataclass(frozen=True)
class WeakValueReport:
    """Weak value, associated weak value and optional higher orders."""

    a_w: complex
    a_w_11: float
    a_w_kl: dict[tuple[int, int], complex] | None = field(default=None, compare=False)
    post_prob: float | None = None

    def __post_init__(self) -> None:
        if self.a_w_11 < 0 and abs(self.a_w_11) > EPS_HERM:
            raise InvalidOperator(f"associated weak value {self.a_w_11!r} is negative")
        if abs(self.a_w) ** 2 > self.a_w_11 * (1 + EPS_REL) + EPS_HERM:
            raise InvalidOperator("|A_w|^2 exceeds A_w^(1,1)")

    @classmethod
    def pure(cls, a_w: complex, post_prob: float | None = None) -> "WeakValueReport":
        """Report for pure preselection, where A_w^(1,1) = |A_w|^2."""
        a_w = complex(a_w)
        return cls(a_w, abs(a_w) ** 2, None, post_prob)

    def to_json(self) -> dict:
        out: dict = {"a_w": [self.a_w.real, self.a_w.imag], "a_w_11": self.a_w_11}
        if self.post_prob is not None:
            out["post_prob"] = self.post_prob
        if self.a_w_kl:
            out["a_w_kl"] = {f"{k},{l}": [v.real, v.imag] for (k, l), v in sorted(self.a_w_kl.items())}
        return out


def weak_value(a: MatrixLike, rho: MatrixLike, e: MatrixLike) -> complex:
    """Tr(E A rho) / Tr(E rho)."""
    am, r, em = as_matrix(a), as_matrix(rho), as_matrix(e)
    check_same_dim(am, r, em)
    return _trace(em, am, r) / post_selection_probability(r, em)


def associated_weak_value(a: MatrixLike, rho: MatrixLike, e: MatrixLike) -> float:
    """Tr(A E A rho) / Tr(E rho), real and not below |A_w|^2."""
    am, r, em = as_matrix(a), as_matrix(rho), as_matrix(e)
    check_same_dim(am, r, em)
    return float(np.real(_trace(am, em, am, r))) / post_selection_probability(r, em)


def generalized_weak_values(
    a: MatrixLike, rho: MatrixLike, e: MatrixLike, max_order: int
) -> dict[tuple[int, int], complex]:
    """All Tr(A^l E A^k rho) / Tr(E rho) for 0 <= k, l <= max_order."""
    if not 0 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must lie in [0, {MAX_ORDER}]")
    am, r, em = as_matrix(a), as_matrix(rho), as_matrix(e)
    check_same_dim(am, r, em)
    norm = post_selection_probability(r, em)
    powers = [np.eye(am.shape[0], dtype=complex)]
    for _ in range(max_order):
        powers.append(powers[-1] @ am)
    return {
        (k, l): _trace(powers[l], em, powers[k], r) / norm
        for k in range(max_order + 1)
        for l in range(max_order + 1)
    }


def weak_value_report(
    a: MatrixLike, rho: MatrixLike, e: MatrixLike, max_order: int = 0
) -> WeakValueReport:
    """Bundle A_w, A_w^(1,1), Tr(E rho) and optionally the generalized table."""
    kl = generalized_weak_values(a, rho, e, max_order) if max_order > 0 else None
    return WeakValueReport(
        weak_value(a, rho, e),
        associated_weak_value(a, rho, e),
        kl,
        post_selection_probability(rho, e),
    )


@dataclass(frozen=True)
class WeakProbabilityTable:
    """Eigenvalue labels paired with complex weak probabilities."""

    entries: tuple[tuple[float, complex], ...]

    def __post_init__(self) -> None:
        total = sum(w for _, w in self.entries)
        if abs(total - 1) > EPS_NORM * 100:
            raise InvalidOperator(f"weak probabilities sum to {total!r}")

    @property
    def values(self) -> np.ndarray:
        return np.array([w for _, w in self.entries])

    def weak_value(self) -> complex:
        return complex(sum(a * w for a, w in self.entries))


@dataclass(frozen=True)
class ProbabilityTable:
    """Eigenvalue labels paired with conditional probabilities."""

    entries: tuple[tuple[float, float], ...]

    @property
    def values(self) -> np.ndarray:
        return np.array([p for _, p in self.entries])


def weak_probabilities(
    pvm: ProjectionValuedMeasure, rho: MatrixLike, e: MatrixLike
) -> WeakProbabilityTable:
    """(Pi_i)_w for every projector of the measurement."""
    return WeakProbabilityTable(
        tuple((a, weak_value(p, rho, e)) for a, p in zip(pvm.eigenvalues, pvm.projectors))
    )


def abl_probabilities(
    pvm: ProjectionValuedMeasure, rho: MatrixLike, e: MatrixLike
) -> ProbabilityTable:
    """Conditional outcome probabilities of a strong intermediate measurement."""
    r, em = as_matrix(rho), as_matrix(e)
    check_same_dim(r, em, pvm.projectors[0])
    weights = np.array(
        [max(0.0, float(np.real(_trace(em, p, r, p)))) for p in pvm.projectors]
    )
    total = weights.sum()
    if total <= overlap_threshold(r, em):
        raise VanishingPostSelection("no intermediate outcome is compatible with the post-selection")
    return ProbabilityTable(tuple(zip(pvm.eigenvalues, weights / total)))


def sum_rule_check(a: MatrixLike, rho: MatrixLike, basis: Sequence[np.ndarray]) -> float:
    """|sum_i <phi_i|rho|phi_i> A_w(phi_i) - Tr(A rho)| over a complete basis.

    Basis states with zero overlap contribute <phi_i|A rho|phi_i> directly,
    which is the finite limit of the product.
    """
    am, r = as_matrix(a), as_matrix(rho)
    d = check_same_dim(am, r)
    vecs = np.array([np.asarray(b, dtype=complex).reshape(-1) for b in basis]).T
    if vecs.shape != (d, d) or np.max(np.abs(vecs.conj().T @ vecs - np.eye(d))) > 1e-10:
        raise InvalidOperator("basis must be complete and orthonormal")
    total = 0j
    for i in range(d):
        v = vecs[:, i]
        proj = np.outer(v, v.conj())
        p_i = float(np.real(v.conj() @ r @ v))
        if p_i > overlap_threshold(r, proj):
            total += p_i * weak_value(am, r, proj)
        else:
            total += v.conj() @ am @ r @ v
    return float(abs(total - np.trace(am @ r)))


def time_reversed(rho: MatrixLike, e: MatrixLike, e1: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Swap the roles of preparation and post-selection.

    Returns (E / Tr E, e1 rho). The default e1 = 1 / max eig(rho) keeps the
    new effect inside [0, I].
    """
    r, em = as_matrix(rho), as_matrix(e)
    if e1 is None:
        e1 = 1.0 / float(np.max(np.linalg.eigvalsh(r)))
    tr = float(np.real(np.trace(em)))
    if tr <= 0:
        raise VanishingPostSelection("post-selection element has zero trace")
    return em / tr, e1 * r
