"""Regime classification, amplification, signal-to-noise and parameter inversion."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SIGMA_Z, Ket
from .engine import (
    INVERTED_MIN,
    LINEAR_MAX,
    MeasurementOutcome,
    Regime,
    mu_w,
    regime_of,
)
from .errors import (
    AmbiguousRoot,
    DegenerateAngles,
    InfiniteEnsemble,
    NoRoot,
    Unmeasurable,
    VanishingPostSelection,
)
from .meters import GaussianMeter, MeterMoments, moments_coinciding
from .weakvalues import WeakValueReport

EPS_INV = 1e-9
EPS_ANGLE = 1e-6
MU_MAX = LINEAR_MAX
RESONANCE_RATIO = 10.0


# ------------------------------------------------------------------- regimes


@dataclass(frozen=True)
class RegimeReport:
    """Small parameters of a weak measurement and the regime they imply.

    mu = mu0 + mu1 bounds the strength of the coupling unitary; mu0 is the
    system-meter correlation strength and mu1 the strength of the unitary
    driven by the mean input F_bar. mu_w uses |A_w| in place of |A_phipsi|
    and sets the regime; mu_prime is the mixed-state diagnostic.
    """

    mu: float
    mu0: float
    mu1: float
    mu_prime: float
    mu_w: float
    regime: Regime
    weak_valid: bool


def classify_regime(
    gamma: float,
    a_phipsi: complex,
    a_w: complex,
    m: MeterMoments,
    a2_phiphi: float | None = None,
) -> RegimeReport:
    """Compute the small parameters and the response regime.

    a_phipsi is A_w <phi|psi> (for mixed states, |A_w| sqrt(Tr(E rho))).
    a2_phiphi is (A^2)_phiphi; without it mu_prime falls back to mu.
    Resonance is reported when |F_bar| >= 10 delta_F and both the detuning
    x and the phase offset epsilon lie within 10 delta_F / |F_bar|.
    """
    g = abs(gamma * complex(a_phipsi))
    mu0 = g * m.delta_f
    mu1 = g * abs(m.f_bar)
    mu = g * (abs(m.f_bar) + m.delta_f)
    mu_prime = mu if a2_phiphi is None else abs(gamma) * math.sqrt(max(0.0, a2_phiphi)) * (
        abs(m.f_bar) + m.delta_f
    )
    a_w = complex(a_w)
    regime = regime_of(gamma, a_w, m)
    if a_w.imag != 0 and m.delta_f > 0 and abs(m.f_bar) >= RESONANCE_RATIO * m.delta_f:
        window = RESONANCE_RATIO * m.delta_f / abs(m.f_bar)
        x = 1 + gamma * m.f_bar * a_w.imag
        eps = a_w.real / a_w.imag
        if abs(x) <= window and abs(eps) <= window:
            regime = Regime.RESONANCE
    return RegimeReport(mu, mu0, mu1, mu_prime, mu_w(gamma, a_w, m), regime, mu < MU_MAX)


# ------------------------------------------------------------- amplification


@dataclass(frozen=True)
class AmplificationReport:
    """Order-of-magnitude gain coefficients of a post-selected measurement.

    proper_a is the inverse-overlap gain (or its inverted-region analogue),
    enhancement the gain from meter correlations, total their product,
    snr_r0 the per-measurement SNR in the post-selected ensemble, n0 the
    minimal total ensemble and post_selection_scale = P^(-1/2), which
    proper_a should match to order of magnitude.
    """

    proper_a: float
    enhancement: float
    total: float
    snr_r0: float
    n0: float
    post_selection_scale: float


def enhancement(m: MeterMoments) -> float:
    """|2 <R_c F> / <[R, F]>|; infinite for a non-standard meter."""
    if m.rcf.imag == 0:
        return math.inf
    return abs(m.rcf) / abs(m.rcf.imag)


def amplification(
    gamma: float,
    overlap: complex,
    m: MeterMoments,
    regime: RegimeReport,
    post_prob: float | None = None,
) -> AmplificationReport:
    """Proper amplification, enhancement and the resulting SNR estimates.

    post_prob defaults to |overlap|^2, its weak-coupling value.
    """
    ov = abs(complex(overlap))
    p = ov**2 if post_prob is None else post_prob
    if regime.regime is Regime.INVERTED:
        proper = math.inf if regime.mu0 == 0 else 1.0 / regime.mu0
        r0 = proper * ov
    else:
        if ov == 0:
            raise VanishingPostSelection("zero overlap outside the inverted region")
        proper = 1.0 / ov
        if regime.regime is Regime.RESONANCE:
            proper *= abs(m.f_bar) / m.delta_f
        elif regime.mu0 > 0:
            # the deflection saturates once |gamma A_w| delta_F reaches 1
            proper = min(proper, 1.0 / regime.mu0)
        r0 = proper * regime.mu0
    e = enhancement(m)
    n0 = math.inf if r0 == 0 or p == 0 else 1.0 / (r0**2 * p)
    scale = math.inf if p <= 0 else p**-0.5
    return AmplificationReport(proper, e, proper * e, r0, n0, scale)


def ensemble_size_and_snr(outcome: MeasurementOutcome, delta_r_s: float, n: int) -> tuple[float, float]:
    """Minimal ensemble size n0 (unit SNR) and the SNR sqrt(n / n0) for n trials."""
    if outcome.deflection == 0:
        raise InfiniteEnsemble("zero deflection")
    if outcome.post_prob is None:
        raise ValueError("the outcome carries no post-selection probability")
    if outcome.post_prob <= 0:
        raise VanishingPostSelection("post-selection probability is zero")
    n0 = delta_r_s**2 / (outcome.post_prob * outcome.deflection**2)
    return n0, math.sqrt(n / n0)


# ----------------------------------------------------------------- inversion


def _as_report(a_w: complex | WeakValueReport) -> WeakValueReport:
    return a_w if isinstance(a_w, WeakValueReport) else WeakValueReport.pure(a_w)


def invert_gamma(measured_deflection: float, a_w: complex | WeakValueReport, m: MeterMoments) -> float:
    """Coupling strength from a measured nonlinear deflection.

    Clearing the denominator gives alpha g^2 + 2 beta g + D = 0. The root
    that tends to 0 with D is D / (-beta - sgn(beta) sqrt(beta^2 - alpha D)),
    written in the cancellation-free form. If the other root has the same
    sign and is also weak-valid, D is not monotone there and AmbiguousRoot
    is raised.
    """
    d = float(measured_deflection)
    if d == 0:
        return 0.0
    wv = _as_report(a_w)
    y = wv.a_w.imag
    alpha = wv.a_w_11 * (d * m.f2 - m.frcf)
    beta = d * m.f_bar * y - (m.rcf * wv.a_w).imag
    disc = beta * beta - alpha * d
    if disc < 0:
        raise NoRoot(f"discriminant {disc!r} < 0: deflection unreachable for this A_w")
    scale = math.sqrt(abs(alpha * d)) + abs(d * m.f_bar * y) + abs((m.rcf * wv.a_w).imag)
    if abs(beta) <= EPS_INV * scale:
        raise AmbiguousRoot("both roots are equally far from zero coupling")
    q = -beta - math.copysign(math.sqrt(disc), beta)
    root = d / q
    if alpha != 0:
        other = q / alpha
        if other * root > 0 and mu_w(other, wv.a_w, m) < MU_MAX:
            raise AmbiguousRoot(f"couplings {root!r} and {other!r} give the same deflection")
    return root


def tomography_linear(xi: float, xi_prime: float, theta0: float, theta0_prime: float) -> complex:
    """A_w from two linear-response readings xi = |A_w| sin(theta + theta0).

    xi is the deflection divided by 2 gamma |<R_c F>|; theta0 = arg <R_c F>.
    """
    diff = math.remainder(theta0 - theta0_prime, math.pi)
    if abs(diff) <= EPS_ANGLE:
        raise DegenerateAngles(f"theta0 - theta0' = {theta0 - theta0_prime!r} is a multiple of pi")
    return (xi * np.exp(-1j * theta0_prime) - xi_prime * np.exp(-1j * theta0)) / math.sin(
        theta0 - theta0_prime
    )


def linear_reading(deflection: float, gamma: float, m: MeterMoments) -> tuple[float, float]:
    """(xi, theta0) of a linear-response deflection, for tomography_linear."""
    return deflection / (2 * gamma * abs(m.rcf)), math.atan2(m.rcf.imag, m.rcf.real)


@dataclass(frozen=True)
class TomographyInput:
    """One nonlinear reading: measured deflection, coupling and meter."""

    deflection: float
    gamma: float
    meter: MeterMoments


def _coefficients(t: TomographyInput) -> np.ndarray:
    """(D0, D1, D2, D3) with D0 + D1 Re A_w + D2 Im A_w + D3 |A_w|^2 = 0."""
    d, g, m = t.deflection, t.gamma, t.meter
    return np.array(
        [
            d,
            -2 * g * m.rcf.imag,
            2 * g * (d * m.f_bar - m.rcf.real),
            g * g * (d * m.f2 - m.frcf),
        ]
    )


def _residuals(coef: np.ndarray, x: float, y: float) -> np.ndarray:
    return coef[:, 0] + coef[:, 1] * x + coef[:, 2] * y + coef[:, 3] * (x * x + y * y)


def _newton(coef: np.ndarray, x: float, y: float, steps: int = 6) -> tuple[float, float]:
    for _ in range(steps):
        r = _residuals(coef, x, y)
        jac = np.column_stack([coef[:, 1] + 2 * coef[:, 3] * x, coef[:, 2] + 2 * coef[:, 3] * y])
        if abs(np.linalg.det(jac)) < 1e-300:
            break
        dx, dy = np.linalg.solve(jac, -r)
        x, y = x + dx, y + dy
        if abs(dx) + abs(dy) <= 1e-16 * (1 + abs(x) + abs(y)):
            break
    return x, y


def _line_roots(coef: np.ndarray) -> list[tuple[complex, complex]]:
    """Complex (Re A_w, Im A_w) points shared by both readings and the paraboloid."""
    lhs, rhs = coef[:, 1:], -coef[:, 0]
    direction = np.cross(lhs[0], lhs[1])
    if not np.any(direction):
        raise AmbiguousRoot("the two readings carry the same information")
    (x0, y0, s0), (nx, ny, ns) = np.linalg.lstsq(lhs, rhs, rcond=None)[0], direction
    a, b, c = nx * nx + ny * ny, 2 * (x0 * nx + y0 * ny) - ns, x0 * x0 + y0 * y0 - s0
    if a == 0:
        ts = [] if b == 0 else [complex(-c / b)]
    else:
        sq = cmath.sqrt(b * b - 4 * a * c)
        q = -0.5 * (b + (sq if b * sq.real >= 0 else -sq))
        ts = [0j, complex(-b / a)] if q == 0 else [q / a, c / q]
    return [(x0 + t * nx, y0 + t * ny) for t in ts]


def measurability(readings: Sequence[TomographyInput]) -> tuple[bool, bool]:
    """Whether the signs of Re A_w and Im A_w are fixed by these meters.

    Re A_w enters linearly only through a nonzero commutator, Im A_w only
    through a nonzero covariance or a nonzero F_bar.
    """
    re_known = any(t.meter.rcf.imag != 0 for t in readings)
    im_known = any(t.meter.rcf.real != 0 or t.meter.f_bar != 0 for t in readings)
    return re_known, im_known


def tomography_nonlinear(readings: Sequence[TomographyInput], modulus_only: bool = False) -> complex:
    """A_w from two nonlinear readings of a pure-preselection measurement.

    Each reading fixes a plane in (Re A_w, Im A_w, |A_w|^2); the two planes
    meet in a line, which crosses the paraboloid |A_w|^2 = Re^2 + Im^2 at up
    to two points, each polished by Newton steps. The root inside the
    weak-valid region is returned; two such roots raise AmbiguousRoot, and
    with none the root of smallest |A_w| is returned. A component whose
    sign the meters cannot fix is returned as its magnitude. With
    modulus_only the result is |A_w| as a real number.
    """
    if len(readings) != 2:
        raise ValueError("nonlinear tomography needs exactly two readings")
    if all(t.deflection == 0 for t in readings):
        return 0j
    coef = np.array([_coefficients(t) for t in readings])
    re_known, im_known = measurability(readings)
    if not (re_known or im_known):
        d3 = coef[:, 3]
        if np.all(d3 == 0):
            raise NoRoot("no reading depends on A_w")
        s = -float(coef[:, 0] @ d3) / float(d3 @ d3)
        if s < 0:
            raise NoRoot(f"|A_w|^2 = {s!r} < 0")
        if not modulus_only:
            raise Unmeasurable("only |A_w| is recoverable from two non-standard meters with F_bar = 0")
        return complex(math.sqrt(s), 0.0)
    scale = np.max(np.abs(coef), axis=1)
    found: list[complex] = []
    for xc, yc in _line_roots(coef):
        if abs(xc.imag) + abs(yc.imag) > 1e-6 * (1 + abs(xc) + abs(yc)):
            continue
        x, y = _newton(coef, xc.real, yc.real)
        if np.all(np.abs(_residuals(coef, x, y)) / scale <= 1e-8 * (1 + x * x + y * y)):
            z = complex(x if re_known else abs(x), y if im_known else abs(y))
            if all(abs(z - w) > 1e-8 * (1 + abs(z)) for w in found):
                found.append(z)
    if not found:
        raise NoRoot("the readings admit no real weak value")
    weak = [z for z in found if max(mu_w(t.gamma, z, t.meter) for t in readings) < MU_MAX]
    if len(weak) > 1:
        raise AmbiguousRoot(f"two weak-valid weak values fit both readings: {weak[0]!r}, {weak[1]!r}")
    best = weak[0] if weak else min(found, key=abs)
    if modulus_only:
        return complex(abs(best), 0.0)
    return best


# ------------------------------------------------------------ interferometer


def interferometer_states(phi: float) -> tuple[Ket, Ket]:
    """Preselected and post-selected which-path states for a phase phi.

    With A = diag(1, -1) the weak value is -i cot(phi / 2).
    """
    psi = Ket(np.array([np.exp(1j * phi), 1j]) / math.sqrt(2))
    post = Ket(np.array([1, -1j]) / math.sqrt(2))
    return psi, post


INTERFEROMETER_OBSERVABLE = SIGMA_Z


@dataclass(frozen=True)
class InterferometerReport:
    """Beam-deflection phase measurement with a dark-port post-selection.

    q_s is the nonlinear-formula mean, q_s_small_angle its |phi| << 1 form
    and q_s_exact the exact mean. snr_weak is
    the quoted 3^(-1/4)|phi| sqrt(n); snr_exact is the SNR of the sample
    mean under the exact conditional distribution. snr_split and
    snr_homodyne are the split-detector and balanced-homodyne references.
    """

    q_s: float
    q_s_small_angle: float
    q_s_exact: float
    regime: Regime
    amp_phi: float
    snr_weak: float
    snr_exact: float
    snr_split: float
    snr_homodyne: float
    post_prob: float
    delta_q_s: float

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["regime"] = self.regime.value
        return out


def interferometer_meter(delta_q: float) -> GaussianMeter:
    """Gaussian transverse profile read out in the coupled variable."""
    return GaussianMeter(p_bar=0.0, q_bar=0.0, delta_p=delta_q, b=0.0, role="coinciding")


def interferometer_scenario(gamma: float, phi: float, delta_q: float, n: int) -> InterferometerReport:
    """Weak, exact and reference figures of merit for the phase interferometer."""
    t = math.tan(phi / 2)
    den = t * t + (gamma * delta_q) ** 2
    if den == 0:
        raise VanishingPostSelection("phi = 0 with gamma = 0 leaves the dark port empty")
    q_s = -2 * gamma * delta_q**2 * t / den
    # Exact moments of sin^2(gamma q - phi/2) Phi(q) for a centered Gaussian Phi.
    g = math.exp(-2 * (gamma * delta_q) ** 2)
    p = (1 - math.cos(phi) * g) / 2
    if p <= 0:
        raise VanishingPostSelection("dark port is empty")
    m1 = -gamma * delta_q**2 * math.sin(phi) * g / p
    m2 = (delta_q**2 - math.cos(phi) * (delta_q**2 - 4 * gamma**2 * delta_q**4) * g) / (2 * p)
    sd = math.sqrt(max(0.0, m2 - m1 * m1))
    a_w = -1j / math.tan(phi / 2) if math.sin(phi / 2) != 0 else complex(0, -math.inf)
    m = moments_coinciding(0.0, delta_q)
    regime = regime_of(gamma, a_w, m) if math.isfinite(abs(a_w)) else Regime.INVERTED
    root_n = math.sqrt(n)
    return InterferometerReport(
        q_s=q_s,
        q_s_small_angle=-4 * gamma * delta_q**2 * phi / (phi * phi + 4 * (gamma * delta_q) ** 2),
        q_s_exact=m1,
        regime=regime,
        amp_phi=math.inf if gamma == 0 else 1 / (2 * abs(gamma) * delta_q),
        snr_weak=3**-0.25 * abs(phi) * root_n,
        snr_exact=abs(m1) / sd * math.sqrt(p) * root_n if sd > 0 else math.inf,
        snr_split=math.sqrt(2 / math.pi) * abs(phi) * root_n,
        snr_homodyne=abs(phi) * root_n,
        post_prob=p,
        delta_q_s=sd,
    )


__all__ = [
    "EPS_ANGLE",
    "EPS_INV",
    "INVERTED_MIN",
    "INTERFEROMETER_OBSERVABLE",
    "AmplificationReport",
    "InterferometerReport",
    "RegimeReport",
    "TomographyInput",
    "amplification",
    "classify_regime",
    "enhancement",
    "ensemble_size_and_snr",
    "interferometer_meter",
    "interferometer_scenario",
    "interferometer_states",
    "invert_gamma",
    "linear_reading",
    "measurability",
    "tomography_linear",
    "tomography_nonlinear",
]
