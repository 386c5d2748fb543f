"""Weak and strong measurements on pre- and post-selected ensembles.

Weak values, meter statistics, nonlinear and exact pointer responses,
metrology figures of merit and brute-force simulation oracles.
"""

from __future__ import annotations

from .core import (
    PAULI,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityMatrix,
    Ket,
    Observable,
    PovmElement,
    ProjectionValuedMeasure,
    bloch_ket,
    bloch_state,
    hermitian_expm,
)
from .engine import (
    MeasurementOutcome,
    PointerDistribution,
    Regime,
    exact_pps,
    exact_pps_system,
    exact_standard,
    exact_standard_system,
    mu_w,
    pointer_distribution_exact,
    pointer_distribution_weak,
    pps_deflection_inverted,
    pps_deflection_linear,
    pps_deflection_nonlinear,
    pps_deflection_resonance,
    pps_deflection_series,
    regime_of,
    resonance_parameters,
)
from .errors import (
    AmbiguousRoot,
    DegenerateAngles,
    DegenerateDenominator,
    DimensionMismatch,
    GridTooCoarse,
    InfiniteEnsemble,
    InvalidOperator,
    NoRoot,
    Unmeasurable,
    UnsupportedMeter,
    VanishingPostSelection,
    WeakPPSError,
)
from .meters import (
    GaussianMeter,
    MatrixMeter,
    MeterMoments,
    QubitMeter,
    meter_moments,
    moments_coinciding,
    trig_moments,
)
from .metrology import (
    TomographyInput,
    amplification,
    classify_regime,
    ensemble_size_and_snr,
    interferometer_scenario,
    invert_gamma,
    tomography_linear,
    tomography_nonlinear,
)
from .oracle import GridMeterState, PPSSystem, grid_pps_average, mc_sample, tensor_pps_average
from .scenarios import PRESETS, Scenario, preset, run_scenario
from .weakvalues import (
    WeakValueReport,
    abl_probabilities,
    associated_weak_value,
    post_selection_probability,
    weak_probabilities,
    weak_value,
    weak_value_report,
)

__version__ = "0.1.0"
