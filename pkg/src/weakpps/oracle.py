"""Brute-force reference evolvers and a Monte Carlo measurement sampler.

These share no formulas with the response engine: the grid evolver phases
each eigencomponent of the system observable on a discretized meter
wavefunction, the tensor evolver exponentiates the full coupling on
system x meter, and the sampler draws individual measurement records.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import MatrixLike, as_matrix, check_same_dim, hermitian_expm
from .engine import EPS_DIST, MeasurementOutcome, PointerDistribution
from .errors import DimensionMismatch, GridTooCoarse, InvalidOperator, VanishingPostSelection
from .meters import GaussianMeter, MatrixMeter

EPS_TAIL = 1e-10
DEFAULT_GRID = 4096
DEFAULT_SPAN = 10.0
MAX_TENSOR_DIM = 4096
CHUNK = 1 << 16


@dataclass(frozen=True)
class PPSSystem:
    """Preparation, measured observable and post-selection effect."""

    rho: np.ndarray
    a: np.ndarray
    e: np.ndarray

    def __post_init__(self) -> None:
        r, a, e = as_matrix(self.rho), as_matrix(self.a), as_matrix(self.e)
        check_same_dim(r, a, e)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "e", e)


@dataclass(frozen=True)
class GridMeterState:
    """Meter wavefunction sampled on a uniform grid of the input variable."""

    grid_size: int
    p_min: float
    p_max: float
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        n = int(self.grid_size)
        if n < 16 or n & (n - 1):
            raise InvalidOperator("grid_size must be a power of two >= 16")
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (n,):
            raise InvalidOperator("amplitudes length must equal grid_size")
        if not self.p_max > self.p_min:
            raise InvalidOperator("empty grid")
        object.__setattr__(self, "amplitudes", amp)
        if abs(np.sum(np.abs(amp) ** 2) * self.dp - 1) > EPS_DIST:
            raise InvalidOperator("grid wavefunction is not normalized")
        _check_tails(np.abs(amp) ** 2 * self.dp, "input-variable")

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.grid_size

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.grid_size)

    @property
    def q(self) -> np.ndarray:
        dq = 2 * math.pi / (self.grid_size * self.dp)
        return dq * (np.arange(self.grid_size) - self.grid_size // 2)

    @classmethod
    def from_gaussian(
        cls, m: GaussianMeter, grid_size: int = DEFAULT_GRID, span: float = DEFAULT_SPAN
    ) -> "GridMeterState":
        """Sample a Gaussian meter on p_bar +- span delta_p."""
        lo, hi = m.p_bar - span * m.delta_p, m.p_bar + span * m.delta_p
        dp = (hi - lo) / grid_size
        p = lo + dp * np.arange(grid_size)
        amp = m.psi_p(p)
        amp /= math.sqrt(np.sum(np.abs(amp) ** 2) * dp)
        return cls(grid_size, lo, hi, amp)


def _check_tails(mass: np.ndarray, label: str) -> None:
    k = max(1, len(mass) // 64)
    tail = float(np.sum(mass[:k]) + np.sum(mass[-k:]))
    if tail > EPS_TAIL:
        raise GridTooCoarse(f"{label} tail mass {tail:.3g} exceeds {EPS_TAIL:g}")


def _grid_components(system: PPSSystem, meter: GridMeterState, gamma: float, readout: str):
    """Eigenbasis weights W_kj = E_kj rho_jk and pointer-space component wavefunctions."""
    w, v = np.linalg.eigh(system.a)
    rho_t = v.conj().T @ system.rho @ v
    e_t = v.conj().T @ system.e @ v
    weights = e_t.T * rho_t  # weights[j, k] = E_kj rho_jk
    comps = np.exp(-1j * gamma * np.outer(w, meter.p)) * meter.amplitudes[None, :]
    if readout == "p":
        return weights, comps * math.sqrt(meter.dp), meter.p
    if readout != "q":
        raise InvalidOperator(f"unknown readout {readout!r}")
    sign = (-1.0) ** np.arange(meter.grid_size)
    # centered unitary DFT; the common phase exp(i p_min q) cancels in bilinear forms
    comps_q = np.fft.ifft(comps * sign[None, :] * math.sqrt(meter.dp), axis=1, norm="ortho")
    return weights, comps_q, meter.q


def _bilinear(weights: np.ndarray, comps: np.ndarray, f: np.ndarray | None = None) -> complex:
    """sum_jk weights[j,k] <psi_k| f |psi_j> with f diagonal on the grid."""
    g = comps if f is None else comps * f[None, :]
    gram = comps.conj() @ g.T  # gram[k, j] = <psi_k| f |psi_j>
    return complex(np.sum(weights * gram.T))


def grid_density(system: PPSSystem, meter: GridMeterState, gamma: float, readout: Literal["p", "q"] = "p"):
    """(pointer grid, unnormalized conditional masses per grid point, P(post))."""
    weights, comps, x = _grid_components(system, meter, gamma, readout)
    dens = np.real(np.einsum("jk,kx,jx->x", weights, comps.conj(), comps))
    total = float(np.sum(dens))
    return x, dens, total


def grid_pps_average(
    system: PPSSystem, meter: GridMeterState, gamma: float, readout: Literal["p", "q"] = "p"
) -> MeasurementOutcome:
    """Conditional pointer mean from the discretized joint evolution."""
    weights, comps, x = _grid_components(system, meter, gamma, readout)
    if readout == "q":
        _check_tails(np.sum(np.abs(comps) ** 2, axis=0), "pointer")
    post = _bilinear(weights, comps).real
    if post <= 1e-14:
        raise VanishingPostSelection(f"post-selection probability {post!r}")
    r_s = _bilinear(weights, comps, x).real / post
    unperturbed = PPSSystem(system.rho, system.a, np.eye(system.a.shape[0]))
    w0, c0, _ = _grid_components(unperturbed, meter, 0.0, readout)
    r_bar = _bilinear(w0, c0, x).real / _bilinear(w0, c0).real
    return MeasurementOutcome(r_s, r_s - r_bar, min(1.0, post))


def tensor_final_state(system: PPSSystem, meter: MatrixMeter, gamma: float) -> np.ndarray:
    """rho_f = U (rho x rho_M) U^dagger with U = exp(-i gamma A x F)."""
    d = system.a.shape[0] * meter.f.shape[0]
    if d > MAX_TENSOR_DIM:
        raise DimensionMismatch(f"product dimension {d} exceeds {MAX_TENSOR_DIM}")
    u = hermitian_expm(np.kron(system.a, meter.f), gamma)
    return u @ np.kron(system.rho, meter.rho) @ u.conj().T


def tensor_pps_average(system: PPSSystem, meter: MatrixMeter, gamma: float) -> MeasurementOutcome:
    rho_f = tensor_final_state(system, meter, gamma)
    eye_m = np.eye(meter.f.shape[0])
    post = float(np.real(np.trace(np.kron(system.e, eye_m) @ rho_f)))
    if post <= 1e-14:
        raise VanishingPostSelection(f"post-selection probability {post!r}")
    r_s = float(np.real(np.trace(np.kron(system.e, meter.r) @ rho_f))) / post
    r_bar = float(np.real(np.trace(meter.rho @ meter.r)))
    return MeasurementOutcome(r_s, r_s - r_bar, min(1.0, post))


def tensor_distribution(system: PPSSystem, meter: MatrixMeter, gamma: float) -> tuple[PointerDistribution, float]:
    """Discrete conditional distribution over eigenvalues of R, plus P(post)."""
    rho_f = tensor_final_state(system, meter, gamma)
    w, v = np.linalg.eigh(meter.r)
    masses = []
    for i in range(len(w)):
        proj = np.outer(v[:, i], v[:, i].conj())
        masses.append(float(np.real(np.trace(np.kron(system.e, proj) @ rho_f))))
    masses_arr = np.maximum(np.array(masses), 0.0)
    post = float(masses_arr.sum())
    if post <= 1e-14:
        raise VanishingPostSelection(f"post-selection probability {post!r}")
    return PointerDistribution(w, masses_arr / post, "discrete"), post


# ------------------------------------------------------------ Monte Carlo


@dataclass(frozen=True)
class MCStatistics:
    mean: float
    std: float
    stderr: float
    acceptance_rate: float
    n: int
    n_accepted: int

    def snr(self, r_bar: float = 0.0) -> float:
        """|mean - r_bar| sqrt(n_accepted) / std."""
        return abs(self.mean - r_bar) * math.sqrt(self.n_accepted) / self.std


def _conditional_distribution(system: PPSSystem, meter, gamma: float, readout: str):
    if isinstance(meter, MatrixMeter):
        dist, post = tensor_distribution(system, meter, gamma)
        return dist.grid, dist.density, post, True
    x, dens, post = grid_density(system, meter, gamma, readout)
    if post <= 1e-14:
        raise VanishingPostSelection(f"post-selection probability {post!r}")
    return x, np.maximum(dens, 0.0) / post, post, False


def _sampler(x: np.ndarray, masses: np.ndarray, discrete: bool):
    """Inverse-CDF sampler; linear interpolation between grid points when continuous."""
    if discrete:
        cdf = np.cumsum(masses)
        cdf /= cdf[-1]
        return lambda u: x[np.minimum(np.searchsorted(cdf, u, side="right"), len(x) - 1)]
    # cell-centered piecewise-linear CDF
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (masses[1:] + masses[:-1]))])
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return lambda u: np.interp(u, cdf[keep], x[keep])


def _worker_count(workers: int | None) -> int:
    cap = int(os.environ.get("WEAKPPS_THREADS", os.cpu_count() or 1))
    want = cap if workers is None else workers
    return max(1, min(want, cap))


def _run_chunk(seed: int, index: int, size: int, post: float, draw):
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    accepted = rng.random(size) < post
    k = int(accepted.sum())
    values = draw(rng.random(k)) if k else np.empty(0)
    return k, float(np.sum(values)), float(np.sum(values**2)), values


def mc_sample(
    system: PPSSystem,
    meter: GridMeterState | MatrixMeter,
    gamma: float,
    n: int,
    seed: int,
    workers: int | None = None,
    readout: Literal["p", "q"] = "p",
    statistic=None,
) -> MCStatistics:
    """Sample n measurement records and summarize the accepted pointer values.

    Records are drawn in fixed-size chunks, chunk c seeded by (seed, c), so
    the merged result does not depend on the number of workers.
    statistic optionally maps pointer values before averaging (for example
    numpy.sign for a split detector).
    """
    if n < 1:
        raise InvalidOperator("n must be positive")
    x, masses, post, discrete = _conditional_distribution(system, meter, gamma, readout)
    draw = _sampler(x, masses, discrete)
    if statistic is not None:
        base = draw
        draw = lambda u: statistic(base(u))  # noqa: E731
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])
    with ThreadPoolExecutor(max_workers=_worker_count(workers)) as pool:
        parts = list(pool.map(lambda c: _run_chunk(seed, c, sizes[c], post, draw), range(len(sizes))))
    k = sum(p[0] for p in parts)
    if k == 0:
        raise VanishingPostSelection(f"no accepted records in {n} trials")
    s1 = math.fsum(p[1] for p in parts)
    s2 = math.fsum(p[2] for p in parts)
    mean = s1 / k
    var = max(0.0, s2 / k - mean**2) * (k / (k - 1) if k > 1 else 1.0)
    std = math.sqrt(var)
    return MCStatistics(mean, std, std / math.sqrt(k), k / n, n, k)
