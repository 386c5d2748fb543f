"""Pointer response of weak and strong pre/post-selected measurements.

All formulas are written once in the mixed-state form, with the pair
(A_w, A_w^(1,1)); pure preselection is the special case A_w^(1,1) = |A_w|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Literal

import numpy as np

from .core import MatrixLike, as_matrix, check_same_dim, hermitian_expm
from .errors import (
    DegenerateDenominator,
    InvalidOperator,
    UnsupportedMeter,
    VanishingPostSelection,
)
from .meters import (
    GaussianMeter,
    MatrixMeter,
    MeterMoments,
    QubitMeter,
    RawMoments,
    TrigMoments,
    meter_moments,
    trig_moments,
)
from .weakvalues import (
    EPS_REL,
    MAX_ORDER,
    WeakValueReport,
    overlap_threshold,
    post_selection_probability,
    weak_value_report,
)

EPS_DEN = 1e-12
EPS_DIST = 1e-6
LINEAR_MAX = 0.1
INVERTED_MIN = 10.0


class Regime(str, Enum):
    LINEAR = "Linear"
    STRONGLY_NONLINEAR = "StronglyNonlinear"
    INVERTED = "Inverted"
    RESONANCE = "Resonance"


def mu_w(gamma: float, a_w: complex, m: MeterMoments) -> float:
    """|gamma A_w| (|F_bar| + delta_F), the weak-value strength parameter."""
    return abs(gamma * a_w) * (abs(m.f_bar) + m.delta_f)


def regime_of(gamma: float, a_w: complex, m: MeterMoments) -> Regime:
    mu = mu_w(gamma, a_w, m)
    if mu < LINEAR_MAX:
        return Regime.LINEAR
    if mu > INVERTED_MIN:
        return Regime.INVERTED
    return Regime.STRONGLY_NONLINEAR


@dataclass(frozen=True)
class MeasurementOutcome:
    """Conditional pointer mean, its shift from the unperturbed mean, and P(post)."""

    r_s: float
    deflection: float
    post_prob: float | None = None
    regime_tag: Regime | None = None
    low_signal: bool = False

    def __post_init__(self) -> None:
        if self.post_prob is not None and not (-EPS_REL <= self.post_prob <= 1 + EPS_REL):
            raise InvalidOperator(f"post-selection probability {self.post_prob!r} outside [0, 1]")


# ------------------------------------------------------------ weak formulas


def standard_linear(gamma: float, a_bar: float, m: MeterMoments) -> float:
    """First-order pointer shift without post-selection."""
    return gamma * a_bar * m.commutator_im


def pps_deflection_linear(gamma: float, a_w: complex, m: MeterMoments) -> float:
    """First-order post-selected pointer shift 2 gamma Im(<R_c F> A_w)."""
    return 2 * gamma * (m.rcf * complex(a_w)).imag


def nonlinear_denominator(gamma: float, wv: WeakValueReport, m: MeterMoments) -> float:
    """Relative post-selection probability factor of the nonlinear theory."""
    return 1 + 2 * gamma * m.f_bar * wv.a_w.imag + gamma**2 * m.f2 * wv.a_w_11


def pps_deflection_nonlinear(
    gamma: float,
    wv: WeakValueReport,
    m: MeterMoments,
    rho_phiphi: float | None = None,
) -> MeasurementOutcome:
    """Pointer shift to second order in gamma A, valid for any |gamma A_w|."""
    num = 2 * gamma * (m.rcf * wv.a_w).imag + gamma**2 * m.frcf * wv.a_w_11
    den = nonlinear_denominator(gamma, wv, m)
    if den <= EPS_DEN:
        raise DegenerateDenominator(f"denominator {den!r}: use the exact solution")
    base = wv.post_prob if rho_phiphi is None else rho_phiphi
    post = None if base is None else min(1.0, base * den)
    d = num / den
    return MeasurementOutcome(
        m.r_bar + d,
        d,
        post,
        regime_of(gamma, wv.a_w, m),
        abs(num) < EPS_DEN * abs(den),
    )


@dataclass(frozen=True)
class InvertedResponse:
    """Very-large-weak-value limit and the 1/(gamma A_w) correction to it."""

    r_s_infinity: float
    adjusted_deflection: float
    r_s: float


def pps_deflection_inverted(gamma: float, wv: WeakValueReport, m: MeterMoments) -> InvertedResponse:
    if m.f2 == 0:
        raise DegenerateDenominator("<F^2> = 0")
    if gamma == 0 or wv.a_w_11 == 0:
        raise DegenerateDenominator("the inverted expansion needs gamma^2 A_w^(1,1) <F^2> >> 1")
    r_inf = m.r_bar + m.frcf / m.f2
    adj = 2 * (m.rcf * wv.a_w).imag / (gamma * m.f2 * wv.a_w_11) - 2 * m.f_bar * m.frcf * wv.a_w.imag / (
        gamma * m.f2**2 * wv.a_w_11
    )
    return InvertedResponse(r_inf, adj, r_inf + adj)


@dataclass(frozen=True)
class ResonanceParameters:
    x: float
    epsilon: float
    v: float


def resonance_parameters(gamma: float, wv: WeakValueReport, m: MeterMoments) -> ResonanceParameters:
    """Detuning x, weak-value phase offset epsilon and mixedness v."""
    im = wv.a_w.imag
    if im == 0:
        raise DegenerateDenominator("the resonance needs Im A_w != 0")
    return ResonanceParameters(
        1 + gamma * m.f_bar * im,
        wv.a_w.real / im,
        math.sqrt(max(0.0, wv.a_w_11 - abs(wv.a_w) ** 2)) / abs(im),
    )


def pps_deflection_resonance(x: float, epsilon: float, v: float, m: MeterMoments) -> float:
    """Pointer shift near the large-F_bar resonance gamma F_bar Im A_w = -1."""
    if m.f_bar == 0:
        raise DegenerateDenominator("resonance formula needs F_bar != 0")
    num = m.fcrcfc - epsilon * m.f_bar * m.commutator_im - 2 * x * m.f_bar * m.sigma_fr
    den = m.f_bar**2 * (x**2 + epsilon**2 + (m.delta_f / m.f_bar) ** 2 + v**2)
    return num / den


# ----------------------------------------------------------------- series


def series_terms(
    gamma: float,
    rho: MatrixLike,
    e: MatrixLike,
    a: MatrixLike,
    raw: RawMoments,
    order: int,
    drop_a2: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Order-by-order contributions to <E R_c>_f and <E>_f, divided by Tr(E rho).

    Index n of each array holds the gamma^n term. drop_a2 removes the two
    second-order terms that carry (A^2)_w and its conjugate.
    """
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must lie in [1, {MAX_ORDER}]")
    am, r, em = as_matrix(a), as_matrix(rho), as_matrix(e)
    check_same_dim(am, r, em)
    norm = post_selection_probability(r, em)
    powers = [np.eye(am.shape[0], dtype=complex)]
    for _ in range(order):
        powers.append(powers[-1] @ am)
    num = np.zeros(order + 1, dtype=complex)
    den = np.zeros(order + 1, dtype=complex)
    den[0] = 1.0
    for n in range(1, order + 1):
        pref = (1j * gamma) ** n / math.factorial(n)
        for k in range(n + 1):
            if drop_a2 and n == 2 and k != 1:
                continue
            w = (-1) ** k * math.comb(n, k) * np.trace(powers[n - k] @ em @ powers[k] @ r) / norm
            num[n] += pref * w * raw.mixed(n - k, k)
            den[n] += pref * w * raw.f_power(n)
    return num, den


def pps_deflection_series(
    gamma: float,
    rho: MatrixLike,
    e: MatrixLike,
    a: MatrixLike,
    m_raw: RawMoments,
    order: int,
    drop_a2: bool = False,
) -> list[float]:
    """Deflections from the numerator and denominator both truncated at orders 1..order."""
    num, den = series_terms(gamma, rho, e, a, m_raw, order, drop_a2)
    out = []
    for n in range(1, order + 1):
        d = np.sum(den[: n + 1]).real
        if abs(d) <= EPS_DEN:
            raise DegenerateDenominator(f"order-{n} denominator vanishes")
        out.append(float(np.sum(num[: n + 1]).real / d))
    return out


# ----------------------------------------------------------- exact solutions


def involution_scale(a: MatrixLike) -> float:
    """C0 with A^2 = C0 I, or InvalidOperator when A is not of that form."""
    am = as_matrix(a)
    sq = am @ am
    c0 = float(np.real(np.trace(sq))) / am.shape[0]
    if c0 <= 0 or np.max(np.abs(sq - c0 * np.eye(am.shape[0]))) > 1e-12 * max(1.0, c0):
        raise InvalidOperator("the exact solution needs A^2 proportional to the identity")
    return c0


def exact_q1(wv: WeakValueReport, tm: TrigMoments) -> float:
    return (1 + tm.m_c + 2 * tm.m_s * wv.a_w.imag + (1 - tm.m_c) * wv.a_w_11) / 2


def exact_pps(
    gamma: float, wv: WeakValueReport, tm: TrigMoments, r_bar: float | None = None
) -> MeasurementOutcome:
    """Exact conditional pointer mean for A^2 = I at the coupling tm was built for."""
    q1 = exact_q1(wv, tm)
    if q1 <= EPS_DEN:
        raise DegenerateDenominator(f"Q1 = {q1!r}: post-selected ensemble is empty")
    r_s = (tm.g_cc + 2 * (wv.a_w * tm.g_cs).imag + wv.a_w_11 * tm.g_ss) / q1
    rb = tm.r_bar if r_bar is None else r_bar
    if rb is None:
        raise InvalidOperator("unperturbed pointer mean r_bar is unknown")
    post = None if wv.post_prob is None else min(1.0, wv.post_prob * q1)
    return MeasurementOutcome(r_s, r_s - rb, post)


def exact_standard(gamma: float, a_bar: float, tm: TrigMoments) -> float:
    """Exact pointer mean without post-selection for A^2 = I."""
    return tm.g_cc + tm.g_ss + 2 * a_bar * tm.g_cs.imag


Meter = GaussianMeter | QubitMeter | MatrixMeter


def _normalized_system(a: MatrixLike, gamma: float) -> tuple[np.ndarray, float]:
    c0 = involution_scale(a)
    return as_matrix(a) / math.sqrt(c0), gamma * math.sqrt(c0)


def exact_pps_system(
    a: MatrixLike, rho: MatrixLike, e: MatrixLike, meter: Meter, gamma: float
) -> MeasurementOutcome:
    """exact_pps with A rescaled to A^2 = I and gamma scaled to match."""
    a1, g1 = _normalized_system(a, gamma)
    return exact_pps(g1, weak_value_report(a1, rho, e), trig_moments(meter, g1))


def exact_standard_system(a: MatrixLike, rho: MatrixLike, meter: Meter, gamma: float) -> float:
    a1, g1 = _normalized_system(a, gamma)
    a_bar = float(np.real(np.trace(a1 @ as_matrix(rho))))
    return exact_standard(g1, a_bar, trig_moments(meter, g1))


def nonlinear_system(
    a: MatrixLike, rho: MatrixLike, e: MatrixLike, meter: Meter | MeterMoments, gamma: float
) -> MeasurementOutcome:
    return pps_deflection_nonlinear(gamma, weak_value_report(a, rho, e), meter_moments(meter))


# ---------------------------------------------------------- distributions


@dataclass(frozen=True)
class PointerDistribution:
    """Pointer values with probability densities (continuous) or masses (discrete)."""

    grid: np.ndarray
    density: np.ndarray
    kind: Literal["continuous", "discrete"] = "continuous"

    def __post_init__(self) -> None:
        g = np.asarray(self.grid, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if g.shape != d.shape:
            raise InvalidOperator("grid and density differ in shape")
        if np.min(d, initial=0.0) < -EPS_REL * max(1.0, float(np.max(np.abs(d), initial=0.0))):
            raise InvalidOperator("negative density")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", d)

    def total(self) -> float:
        if self.kind == "discrete":
            return float(np.sum(self.density))
        return float(np.trapezoid(self.density, self.grid))

    def normalized(self) -> "PointerDistribution":
        t = self.total()
        if not t > 0:
            raise InvalidOperator("distribution cannot be normalized")
        return PointerDistribution(self.grid, self.density / t, self.kind)

    def moment(self, n: int = 1) -> float:
        w = self.grid**n * self.density
        if self.kind == "discrete":
            return float(np.sum(w)) / self.total()
        return float(np.trapezoid(w, self.grid)) / self.total()

    def mean(self) -> float:
        return self.moment(1)

    def std(self) -> float:
        return math.sqrt(max(0.0, self.moment(2) - self.mean() ** 2))

    def peak(self) -> float:
        """Maximum location refined by a parabola through the top three points."""
        i = int(np.argmax(self.density))
        if i == 0 or i == len(self.grid) - 1:
            raise InvalidOperator("distribution peaks at the grid edge")
        y0, y1, y2 = self.density[i - 1 : i + 2]
        curv = y0 - 2 * y1 + y2
        if curv >= 0:
            raise InvalidOperator("profile is not bell-shaped at its maximum")
        h = self.grid[i + 1] - self.grid[i]
        return float(self.grid[i] + h * (y0 - y2) / (2 * curv))


def default_grid(meter: GaussianMeter, width: float = 10.0, n: int = 4001) -> np.ndarray:
    """Symmetric pointer grid spanning width standard deviations."""
    if meter.role == "coinciding":
        c, s = meter.p_bar, meter.delta_p
    else:
        c, s = meter.q_bar, meter.delta_q
    return np.linspace(c - width * s, c + width * s, n)


def _components_weak(meter: Meter, grid: np.ndarray | None):
    """(grid, Phi, Phi1, Phi2, kind) with Phi1 = <R|F rho|R>, Phi2 = <R|F rho F|R>."""
    if isinstance(meter, GaussianMeter):
        g = default_grid(meter) if grid is None else np.asarray(grid, dtype=float)
        if meter.role == "coinciding":
            phi = np.exp(-((g - meter.p_bar) ** 2) / (2 * meter.delta_p**2)) / (
                math.sqrt(2 * math.pi) * meter.delta_p
            )
            return g, phi, g * phi, g**2 * phi, "continuous"
        psi, dpsi = meter.psi_q(g), meter.dpsi_q(g)
        return g, np.abs(psi) ** 2, -1j * dpsi * psi.conj(), np.abs(dpsi) ** 2, "continuous"
    rho, f, r = _matrix_ops(meter)
    w, v = np.linalg.eigh(r)
    vals, basis = _group_eigvecs(w, v)
    tr = lambda x: np.array([np.trace(b.conj().T @ x @ b) for b in basis])  # noqa: E731
    return vals, tr(rho).real, tr(f @ rho), tr(f @ rho @ f).real, "discrete"


def _matrix_ops(meter: Meter) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(meter, QubitMeter):
        return meter.operators()
    if isinstance(meter, MatrixMeter):
        return meter.rho, meter.f, meter.r
    raise UnsupportedMeter(f"no operator form for {type(meter).__name__}")


def _group_eigvecs(w: np.ndarray, v: np.ndarray, decimals: int = 9):
    groups: dict[float, list[int]] = {}
    for i, val in enumerate(np.round(w, decimals)):
        groups.setdefault(float(val), []).append(i)
    keys = sorted(groups)
    return np.array([np.mean(w[groups[k]]) for k in keys]), [v[:, groups[k]] for k in keys]


def pointer_distribution_weak(
    gamma: float, wv: WeakValueReport, meter: Meter, grid: np.ndarray | None = None
) -> PointerDistribution:
    """Second-order conditional pointer distribution.

    The far tails are outside the validity of the expansion; compare only
    near the peak.
    """
    g, phi, phi1, phi2, kind = _components_weak(meter, grid)
    dens = phi + 2 * gamma * np.imag(wv.a_w * phi1) + gamma**2 * wv.a_w_11 * phi2
    return PointerDistribution(g, np.maximum(dens, 0.0), kind).normalized()


def pointer_distribution_exact(
    gamma: float, wv: WeakValueReport, meter: Meter, grid: np.ndarray | None = None
) -> PointerDistribution:
    """Exact conditional pointer distribution for A^2 = I."""
    if isinstance(meter, GaussianMeter):
        g = default_grid(meter) if grid is None else np.asarray(grid, dtype=float)
        if meter.role == "coinciding":
            phi = np.exp(-((g - meter.p_bar) ** 2) / (2 * meter.delta_p**2)) / (
                math.sqrt(2 * math.pi) * meter.delta_p
            )
            c, s = np.cos(gamma * g), np.sin(gamma * g)
            cc, sc, ss = c**2 * phi, (s * c * phi).astype(complex), s**2 * phi
        else:
            plus, minus = meter.psi_q(g + gamma), meter.psi_q(g - gamma)
            psi_c, psi_s = (plus + minus) / 2, (plus - minus) / 2j
            cc, sc, ss = np.abs(psi_c) ** 2, psi_s * psi_c.conj(), np.abs(psi_s) ** 2
        kind = "continuous"
    else:
        rho, f, r = _matrix_ops(meter)
        c, s = _trig_matrices(f, gamma)
        w, v = np.linalg.eigh(r)
        g, basis = _group_eigvecs(w, v)
        tr = lambda x: np.array([np.trace(b.conj().T @ x @ b) for b in basis])  # noqa: E731
        cc, sc, ss = tr(c @ rho @ c).real, tr(s @ rho @ c), tr(s @ rho @ s).real
        kind = "discrete"
    dens = cc + 2 * np.imag(wv.a_w * sc) + wv.a_w_11 * ss
    return PointerDistribution(g, np.maximum(dens, 0.0), kind).normalized()


def _trig_matrices(f: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(f)
    return (v * np.cos(gamma * w)) @ v.conj().T, (v * np.sin(gamma * w)) @ v.conj().T


def distribution_peak_shift(gamma: float, a_w: complex, meter: GaussianMeter, beta: float = 1.0) -> float:
    """First-order displacement of the pointer-distribution maximum.

    beta is the curvature ratio of the profile at its top (1 for a Gaussian).
    """
    a_w = complex(a_w)
    if meter.role == "coinciding":
        return 2 * beta * gamma * meter.delta_p**2 * a_w.imag
    xi_pp = 2 * meter.b * meter.delta_p**2 / (1 + meter.b**2)
    return gamma * (a_w.real + 2 * beta * xi_pp * meter.delta_q**2 * a_w.imag)


# -------------------------------------------------------- transient state


def transient_equivalence(rho: MatrixLike, e: MatrixLike) -> np.ndarray:
    """(E rho + rho E) / (2 Tr(E rho)), Hermitian with unit trace, not always positive."""
    r, em = as_matrix(rho), as_matrix(e)
    check_same_dim(r, em)
    p = float(np.real(np.trace(em @ r)))
    if p <= overlap_threshold(r, em):
        raise VanishingPostSelection("Tr(E rho) vanishes")
    return (em @ r + r @ em) / (2 * p)


def evolve_joint(
    a: MatrixLike, rho: MatrixLike, meter: MatrixMeter, gamma: float
) -> np.ndarray:
    """rho_f = U (rho x rho_M) U^dagger with U = exp(-i gamma A x F)."""
    u = hermitian_expm(np.kron(as_matrix(a), meter.f), gamma)
    joint = np.kron(as_matrix(rho), meter.rho)
    return u @ joint @ u.conj().T


def sweep(fn: Callable[[float], float], values: np.ndarray) -> np.ndarray:
    """Evaluate fn over values, storing NaN where the formula is undefined."""
    out = np.empty(len(values))
    for i, x in enumerate(values):
        try:
            out[i] = fn(float(x))
        except (DegenerateDenominator, VanishingPostSelection):
            out[i] = np.nan
    return out
