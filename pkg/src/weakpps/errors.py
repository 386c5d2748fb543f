"""Exception types shared across the package."""

from __future__ import annotations


class WeakPPSError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(WeakPPSError, ValueError):
    """Operands act on spaces of different dimension."""


class InvalidOperator(WeakPPSError, ValueError):
    """A matrix violates the invariants of its declared type."""


class VanishingPostSelection(WeakPPSError):
    """Tr(E rho) is numerically zero, so the post-selected ensemble is empty."""


class DegenerateDenominator(WeakPPSError):
    """The response denominator is numerically zero."""


class InfiniteEnsemble(WeakPPSError):
    """Zero deflection: no finite ensemble resolves the signal."""


class NoRoot(WeakPPSError):
    """An inversion problem has no real solution."""


class AmbiguousRoot(WeakPPSError):
    """An inversion problem has no uniquely selectable root."""


class Unmeasurable(WeakPPSError):
    """The requested quantity cannot be recovered from the given meters."""


class DegenerateAngles(WeakPPSError):
    """Two meter phases coincide modulo pi."""


class UnsupportedMeter(WeakPPSError, ValueError):
    """The meter cannot supply the requested quantity."""


class GridTooCoarse(WeakPPSError):
    """The wavefunction leaks into the edges of the grid."""
