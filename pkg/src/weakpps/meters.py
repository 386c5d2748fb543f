"""Meter models reduced to the moments that enter every response formula.

A meter couples through its input variable F and is read out through its
pointer variable R. Polynomial moments (MeterMoments) drive the weak and
nonlinear formulas; trigonometric moments (TrigMoments) drive the exact
solution for observables with two eigenvalues of equal magnitude; raw
moments (RawMoments) drive the coupling-constant series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Protocol

import numpy as np

from .core import MatrixLike, as_matrix, hermitian_expm, sigma_dot
from .errors import InvalidOperator, UnsupportedMeter

EPS_REL = 1e-9


@dataclass(frozen=True)
class MeterMoments:
    """Statistics of the meter state that close the response formulas.

    rcf = <R_c F>, frcf = <F R_c F>, fcrcfc = <F_c R_c F_c>, f2 = <F^2>,
    with X_c = X - <X>.
    """

    f_bar: float
    delta_f: float
    r_bar: float
    delta_r: float
    rcf: complex
    frcf: float
    fcrcfc: float
    f2: float

    def __post_init__(self) -> None:
        if self.delta_f < 0 or self.delta_r < 0:
            raise InvalidOperator("standard deviations must be non-negative")
        scale = max(1.0, self.f2, abs(self.frcf), abs(self.fcrcfc))
        if abs(self.f2 - (self.f_bar**2 + self.delta_f**2)) > EPS_REL * scale:
            raise InvalidOperator("f2 != f_bar^2 + delta_f^2")
        if self.delta_r * self.delta_f < abs(self.rcf) - EPS_REL * max(1.0, abs(self.rcf)):
            raise InvalidOperator("generalized uncertainty relation violated")
        if abs(self.frcf - self.fcrcfc - 2 * self.f_bar * self.rcf.real) > EPS_REL * scale:
            raise InvalidOperator("frcf != fcrcfc + 2 f_bar Re(rcf)")

    @classmethod
    def build(
        cls,
        f_bar: float,
        delta_f: float,
        r_bar: float,
        delta_r: float,
        rcf: complex,
        fcrcfc: float,
    ) -> "MeterMoments":
        """Fill in frcf and f2 from the independent moments."""
        rcf = complex(rcf)
        return cls(
            float(f_bar),
            float(delta_f),
            float(r_bar),
            float(delta_r),
            rcf,
            float(fcrcfc + 2 * f_bar * rcf.real),
            float(fcrcfc),
            float(f_bar**2 + delta_f**2),
        )

    @property
    def sigma_fr(self) -> float:
        """Symmetrized covariance Re<R_c F>."""
        return self.rcf.real

    @property
    def commutator_im(self) -> float:
        """Im<[R, F]> = 2 Im<R_c F>."""
        return 2 * self.rcf.imag

    def with_f_bar(self, f_bar: float) -> "MeterMoments":
        """Same meter state with the input variable offset to a new mean."""
        return MeterMoments.build(f_bar, self.delta_f, self.r_bar, self.delta_r, self.rcf, self.fcrcfc)


@dataclass(frozen=True)
class TrigMoments:
    """Averages of trigonometric functions of gamma F for the exact solution.

    m_c = <cos 2gF>, m_s = <sin 2gF>, g_cc = <c R c>, g_ss = <s R s>,
    g_cs = <c R s> with c = cos gF and s = sin gF. The primed moments are
    <F sin 2gF> and <F cos 2gF> (pointer equal to input); g1 and g2 are
    <zeta' cos 2gp> and <zeta' sin 2gp> (conjugate pointer).
    """

    m_c: float
    m_s: float
    g_cc: float
    g_ss: float
    g_cs: complex
    m_c_prime: float | None = None
    m_s_prime: float | None = None
    g1: float | None = None
    g2: float | None = None
    r_bar: float | None = None


# ---------------------------------------------------------------- meter types


@dataclass(frozen=True)
class GaussianMeter:
    """Complex Gaussian meter state of a canonical pair (p, q), q = i d/dp.

    psi(p) ~ exp[-(p - p_bar)^2 (1 + i b) / (4 delta_p^2) - i q_bar p].
    role "conjugate": F = p, R = q. role "coinciding": F = R = p.
    """

    p_bar: float = 0.0
    q_bar: float = 0.0
    delta_p: float = 1.0
    b: float = 0.0
    role: Literal["conjugate", "coinciding"] = "conjugate"

    def __post_init__(self) -> None:
        if not self.delta_p > 0:
            raise InvalidOperator("delta_p must be positive")
        if self.role not in ("conjugate", "coinciding"):
            raise InvalidOperator(f"unknown Gaussian meter role {self.role!r}")

    @property
    def delta_q(self) -> float:
        return math.sqrt(1 + self.b**2) / (2 * self.delta_p)

    def zeta_prime(self, p: np.ndarray) -> np.ndarray:
        """Phase gradient, which is the local mean of q at momentum p."""
        return self.q_bar + self.b * (np.asarray(p) - self.p_bar) / (2 * self.delta_p**2)

    def psi_p(self, p: np.ndarray) -> np.ndarray:
        """Normalized momentum-space wavefunction."""
        p = np.asarray(p, dtype=float)
        norm = (2 * math.pi * self.delta_p**2) ** -0.25
        u = p - self.p_bar
        return norm * np.exp(-(u**2) * (1 + 1j * self.b) / (4 * self.delta_p**2) - 1j * self.q_bar * p)

    def psi_q(self, q: np.ndarray) -> np.ndarray:
        """Normalized position-space wavefunction, the Fourier image of psi_p."""
        q = np.asarray(q, dtype=float)
        z = (1 + 1j * self.b) / (4 * self.delta_p**2)
        norm = (2 * math.pi * self.delta_p**2) ** -0.25 / np.sqrt(2 * z)
        u = q - self.q_bar
        return norm * np.exp(1j * self.p_bar * u - u**2 / (4 * z))

    def dpsi_q(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        z = (1 + 1j * self.b) / (4 * self.delta_p**2)
        return self.psi_q(q) * (1j * self.p_bar - (q - self.q_bar) / (2 * z))


@dataclass(frozen=True)
class QubitMeter:
    """Two-level meter with F = sigma.n_f + f0, R = sigma.n_r, rho_M = (I + sigma.s_m)/2."""

    n_f: tuple[float, float, float] = (1.0, 0.0, 0.0)
    n_r: tuple[float, float, float] = (0.0, 1.0, 0.0)
    f0: float = 0.0
    s_m: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        for name in ("n_f", "n_r", "s_m"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise InvalidOperator(f"{name} must be a 3-vector")
            object.__setattr__(self, name, tuple(float(x) for x in v))
        if abs(np.linalg.norm(self.n_f) - 1) > EPS_REL or abs(np.linalg.norm(self.n_r) - 1) > EPS_REL:
            raise InvalidOperator("n_f and n_r must be unit vectors")
        if np.linalg.norm(self.s_m) > 1 + EPS_REL:
            raise InvalidOperator("|s_m| must not exceed 1")

    @property
    def f_bar1(self) -> float:
        return float(np.dot(self.s_m, self.n_f))

    @property
    def r_bar(self) -> float:
        return float(np.dot(self.s_m, self.n_r))

    @property
    def m_r(self) -> float:
        """Re<R F_1> = cos(eta)."""
        return float(np.dot(self.n_r, self.n_f))

    @property
    def m_i(self) -> float:
        """Im<R F_1> = s_m . (n_r x n_f); zero for collinear axes."""
        return float(np.dot(self.s_m, np.cross(self.n_r, self.n_f)))

    @property
    def m(self) -> float:
        """<F_1 R F_1> = 2 cos(eta) f_bar1 - r_bar."""
        return 2 * self.m_r * self.f_bar1 - self.r_bar

    def operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rho_M, F, R) as 2x2 matrices."""
        rho = (np.eye(2) + sigma_dot(self.s_m)) / 2
        return rho, sigma_dot(self.n_f) + self.f0 * np.eye(2), sigma_dot(self.n_r)

    @classmethod
    def configuration(cls, number: int, f0: float = 0.0, eta: float = math.pi / 2) -> "QubitMeter":
        """Standard qubit-meter configurations 1 to 7 (eta is the F-R angle)."""
        n_r = np.array([1.0, 0.0, 0.0])
        n_f = np.array([math.cos(eta), math.sin(eta), 0.0])
        n_perp = np.array([0.0, 1.0, 0.0])
        n_2 = np.array([0.0, 0.0, 1.0])
        if number == 1:
            return cls(tuple(n_perp), tuple(n_r), f0, tuple(n_2))
        if number == 2:
            return cls(tuple(n_r), tuple(n_r), f0, tuple(n_perp))
        if number == 3:
            return cls(tuple(n_f), tuple(n_r), f0, tuple(n_2))
        if number == 4:
            return cls(tuple(n_r), tuple(n_r), f0, (0.6, 0.0, 0.8))
        if number == 5:
            return cls(tuple(n_f), tuple(n_r), f0, tuple(n_r))
        if number == 6:
            return cls(tuple(n_perp), tuple(n_r), f0, tuple(n_r))
        if number == 7:
            return cls(tuple(n_f), tuple(n_r), f0, (0.0, 0.0, 0.0))
        raise InvalidOperator(f"no qubit configuration {number}")


@dataclass(frozen=True)
class MatrixMeter:
    """Finite-dimensional meter given by explicit operators."""

    rho: np.ndarray
    f: np.ndarray
    r: np.ndarray

    def __post_init__(self) -> None:
        for name in ("rho", "f", "r"):
            object.__setattr__(self, name, as_matrix(getattr(self, name)))


# ----------------------------------------------------------- polynomial moments


def moments_coinciding(f_bar: float, delta_f: float, fc3: float = 0.0) -> MeterMoments:
    """Pointer equal to the input variable; fc3 is the third central moment."""
    if not delta_f > 0:
        raise InvalidOperator("delta_f must be positive for a usable meter")
    return MeterMoments.build(f_bar, delta_f, f_bar, delta_f, delta_f**2, fc3)


def moments_gaussian(m: GaussianMeter) -> MeterMoments:
    if m.role == "coinciding":
        return moments_coinciding(m.p_bar, m.delta_p, 0.0)
    return MeterMoments.build(m.p_bar, m.delta_p, m.q_bar, m.delta_q, complex(m.b / 2, 0.5), 0.0)


def moments_qubit(m: QubitMeter) -> MeterMoments:
    """Closed-form qubit moments; collinear axes need no special branch here."""
    f1, r_bar = m.f_bar1, m.r_bar
    delta_f = math.sqrt(max(0.0, 1 - f1**2))
    if delta_f == 0:
        raise InvalidOperator("meter state is an eigenstate of F; no measurement possible")
    rcf = complex(m.m_r - r_bar * f1, m.m_i)
    fcrcfc = m.m - 2 * f1 * m.m_r + r_bar * (2 * f1**2 - 1)
    return MeterMoments.build(
        f1 + m.f0, delta_f, r_bar, math.sqrt(max(0.0, 1 - r_bar**2)), rcf, fcrcfc
    )


def moments_matrix(m: MatrixMeter) -> MeterMoments:
    """Moments of an arbitrary finite meter, by direct traces."""
    rho, f, r = m.rho, m.f, m.r
    ev = lambda x: complex(np.trace(rho @ x))  # noqa: E731
    f_bar, r_bar = ev(f).real, ev(r).real
    eye = np.eye(f.shape[0])
    fc, rc = f - f_bar * eye, r - r_bar * eye
    delta_f = math.sqrt(max(0.0, ev(fc @ fc).real))
    if delta_f == 0:
        raise InvalidOperator("meter state is an eigenstate of F; no measurement possible")
    return MeterMoments.build(
        f_bar, delta_f, r_bar, math.sqrt(max(0.0, ev(rc @ rc).real)), ev(rc @ f), ev(fc @ rc @ fc).real
    )


def meter_moments(meter: GaussianMeter | QubitMeter | MatrixMeter | MeterMoments) -> MeterMoments:
    """Dispatch to the matching moment constructor."""
    if isinstance(meter, MeterMoments):
        return meter
    if isinstance(meter, GaussianMeter):
        return moments_gaussian(meter)
    if isinstance(meter, QubitMeter):
        return moments_qubit(meter)
    if isinstance(meter, MatrixMeter):
        return moments_matrix(meter)
    raise UnsupportedMeter(f"no moments for {type(meter).__name__}")


# -------------------------------------------------------------- trig moments


def trig_moments_gaussian(m: GaussianMeter, gamma: float) -> TrigMoments:
    """Closed-form trigonometric moments for both Gaussian roles."""
    damp = math.exp(-2 * (gamma * m.delta_p) ** 2)
    ph = 2 * gamma * m.p_bar
    m_c, m_s = math.cos(ph) * damp, math.sin(ph) * damp
    var = m.delta_p**2
    m_c_prime = (m.p_bar * math.sin(ph) + 2 * gamma * var * math.cos(ph)) * damp
    m_s_prime = (m.p_bar * math.cos(ph) - 2 * gamma * var * math.sin(ph)) * damp
    g1 = (m.q_bar * math.cos(ph) - gamma * m.b * math.sin(ph)) * damp
    g2 = (m.q_bar * math.sin(ph) + gamma * m.b * math.cos(ph)) * damp
    if m.role == "coinciding":
        g_cc, g_ss, g_cs = (m.p_bar + m_s_prime) / 2, (m.p_bar - m_s_prime) / 2, complex(m_c_prime / 2)
    else:
        g_cc, g_ss, g_cs = (m.q_bar + g1) / 2, (m.q_bar - g1) / 2, complex(g2 / 2, gamma / 2)
    r_bar = m.p_bar if m.role == "coinciding" else m.q_bar
    return TrigMoments(m_c, m_s, g_cc, g_ss, g_cs, m_c_prime, m_s_prime, g1, g2, r_bar)


def trig_moments_coinciding_gaussian(f_bar: float, delta_f: float, gamma: float) -> TrigMoments:
    """Pointer equal to a Gaussian-distributed input variable."""
    return trig_moments_gaussian(GaussianMeter(p_bar=f_bar, delta_p=delta_f, role="coinciding"), gamma)


def trig_moments_qubit(m: QubitMeter, gamma: float) -> TrigMoments:
    """Closed-form trigonometric moments of a qubit meter."""
    c10, s10 = math.cos(gamma), math.sin(gamma)
    c11, s11 = math.cos(gamma * m.f0), math.sin(gamma * m.f0)
    c20, s20 = math.cos(2 * gamma), math.sin(2 * gamma)
    c21, s21 = math.cos(2 * gamma * m.f0), math.sin(2 * gamma * m.f0)
    r_bar, m_r, m_i, mm, f1 = m.r_bar, m.m_r, m.m_i, m.m, m.f_bar1
    g_cc = c10**2 * c11**2 * r_bar - s20 * s21 * m_r / 2 + s10**2 * s11**2 * mm
    g_cs = complex(c10**2 * s21 * r_bar + s20 * c21 * m_r - s10**2 * s21 * mm, s20 * m_i) / 2
    g_ss = c10**2 * s11**2 * r_bar + s20 * s21 * m_r / 2 + s10**2 * c11**2 * mm
    m_c = c20 * c21 - s20 * s21 * f1
    m_s = c20 * s21 + s20 * c21 * f1
    return TrigMoments(m_c, m_s, g_cc, g_ss, g_cs, r_bar=r_bar)


def trig_moments_matrix(m: MatrixMeter, gamma: float) -> TrigMoments:
    """Trigonometric moments of a finite meter via its spectral decomposition."""
    w, v = np.linalg.eigh((m.f + m.f.conj().T) / 2)
    fn = lambda g: (v * g(gamma * w)) @ v.conj().T  # noqa: E731
    c, s = fn(np.cos), fn(np.sin)
    ev = lambda x: complex(np.trace(m.rho @ x))  # noqa: E731
    return TrigMoments(
        ev(c @ c - s @ s).real,
        ev(2 * s @ c).real,
        ev(c @ m.r @ c).real,
        ev(s @ m.r @ s).real,
        ev(c @ m.r @ s),
        r_bar=ev(m.r).real,
    )


def trig_moments(meter: GaussianMeter | QubitMeter | MatrixMeter, gamma: float) -> TrigMoments:
    if isinstance(meter, GaussianMeter):
        return trig_moments_gaussian(meter, gamma)
    if isinstance(meter, QubitMeter):
        return trig_moments_qubit(meter, gamma)
    if isinstance(meter, MatrixMeter):
        return trig_moments_matrix(meter, gamma)
    raise UnsupportedMeter(f"no trigonometric moments for {type(meter).__name__}")


# --------------------------------------------------------------- raw moments


class RawMoments(Protocol):
    """Provider of <F^n> and <F^j R_c F^k> for the coupling-constant series."""

    def f_power(self, n: int) -> float: ...

    def mixed(self, j: int, k: int) -> complex: ...


def gaussian_raw_moment(mean: float, sd: float, n: int) -> float:
    """E[X^n] for X ~ N(mean, sd^2)."""
    total = 0.0
    for k in range(n // 2 + 1):
        dfact = math.prod(range(2 * k - 1, 0, -2)) if k else 1
        total += math.comb(n, 2 * k) * mean ** (n - 2 * k) * sd ** (2 * k) * dfact
    return total


@dataclass(frozen=True)
class GaussianRawMoments:
    """Exact raw moments of a Gaussian meter in either role."""

    meter: GaussianMeter

    def f_power(self, n: int) -> float:
        return gaussian_raw_moment(self.meter.p_bar, self.meter.delta_p, n)

    def mixed(self, j: int, k: int) -> complex:
        m = self.meter
        pw = self.f_power
        if m.role == "coinciding":
            return complex(pw(j + k + 1) - m.p_bar * pw(j + k))
        n = j + k
        zeta = m.q_bar * pw(n) + m.b / (2 * m.delta_p**2) * (pw(n + 1) - m.p_bar * pw(n))
        lower = pw(n - 1) if n >= 1 else 0.0
        return complex(zeta - m.q_bar * pw(n), -(j - k) / 2 * lower)


@dataclass(frozen=True)
class MatrixRawMoments:
    """Raw moments of a finite meter by explicit matrix products."""

    meter: MatrixMeter
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def _power(self, n: int) -> np.ndarray:
        if n not in self._cache:
            self._cache[n] = np.linalg.matrix_power(self.meter.f, n)
        return self._cache[n]

    def f_power(self, n: int) -> float:
        return float(np.real(np.trace(self.meter.rho @ self._power(n))))

    def mixed(self, j: int, k: int) -> complex:
        r = self.meter.r
        rc = r - np.real(np.trace(self.meter.rho @ r)) * np.eye(r.shape[0])
        return complex(np.trace(self.meter.rho @ self._power(j) @ rc @ self._power(k)))


def raw_moments(meter: GaussianMeter | QubitMeter | MatrixMeter) -> RawMoments:
    if isinstance(meter, GaussianMeter):
        return GaussianRawMoments(meter)
    if isinstance(meter, QubitMeter):
        rho, f, r = meter.operators()
        return MatrixRawMoments(MatrixMeter(rho, f, r))
    if isinstance(meter, MatrixMeter):
        return MatrixRawMoments(meter)
    raise UnsupportedMeter(f"no raw moments for {type(meter).__name__}")


# -------------------------------------------------------- gauge and dynamics


@dataclass(frozen=True)
class GaugeTransform:
    """System rotation exp(-i gamma f0 A) that compensates an input offset f0."""

    f0: float

    def unitary(self, a: MatrixLike, gamma: float) -> np.ndarray:
        return hermitian_expm(a, gamma * self.f0)

    def apply(self, rho: MatrixLike, a: MatrixLike, gamma: float) -> np.ndarray:
        u = self.unitary(a, gamma)
        return u @ as_matrix(rho) @ u.conj().T


def gauge_shift_f(meter: MeterMoments, f0: float) -> tuple[MeterMoments, GaugeTransform]:
    """Shift F -> F - f0 and return the system transform that undoes it."""
    return meter.with_f_bar(meter.f_bar - f0), GaugeTransform(f0)


def gauge_shift_qubit(meter: QubitMeter, f0: float) -> tuple[QubitMeter, GaugeTransform]:
    return replace(meter, f0=meter.f0 - f0), GaugeTransform(f0)


def gauge_shift_gaussian(meter: GaussianMeter, f0: float) -> tuple[GaussianMeter, GaugeTransform]:
    """Shift the momentum mean; the quadratic phase stays centered on the new mean."""
    return replace(meter, p_bar=meter.p_bar - f0), GaugeTransform(f0)


@dataclass(frozen=True)
class EffectivePointer:
    """Pointer q(t) = q + (t/m) p generated by free evolution."""

    q_coefficient: float
    p_coefficient: float


@dataclass(frozen=True)
class FreeEvolution:
    meter: GaussianMeter
    pointer: EffectivePointer
    enhancement: float


def free_meter_hamiltonian_effects(m: GaussianMeter, mass: float, t_m: float) -> FreeEvolution:
    """Fold free evolution p^2/(2 mass) over time t_m into the meter state.

    The quadratic phase grows by 2 delta_p^2 t_m / mass and the position
    mean drifts by p_bar t_m / mass. The enhancement reported is the
    quadratic-phase increment, its large-time form.
    """
    if not mass > 0:
        raise InvalidOperator("mass must be positive")
    if t_m < 0:
        raise InvalidOperator("t_m must be non-negative")
    db = 2 * m.delta_p**2 * t_m / mass
    evolved = replace(m, b=m.b + db, q_bar=m.q_bar + m.p_bar * t_m / mass)
    return FreeEvolution(evolved, EffectivePointer(1.0, t_m / mass), db)
