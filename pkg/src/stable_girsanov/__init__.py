"""Numerics for purely discontinuous Girsanov transforms of alpha-stable-like processes.

Modules
-------
model
    Process and perturbation specifications, reference density, Kato checks.
sim
    Path simulation with recorded large jumps.
functional
    Additive functionals, the weight L_t and the power formulas for A^n.
series
    Perturbation series q_n, dominating terms, G, C_t and lemma constants.
estimate
    Weighted Monte Carlo densities and two-sided envelope fits.
"""

from .exceptions import (
    ConfigError,
    DomainError,
    GirsanovError,
    JClassViolation,
    QuadratureError,
    ThinningError,
)
from .model import (
    JumpFunctionalSpec,
    ProcessSpec,
    ReferenceDensity,
    check_envelope_11,
    check_kato_J,
    envelope,
    f_theta,
    levy_kernel_density,
    reference_p,
)
from .sim import JumpEvent, PathRecord, SimMode, simulate_path, simulate_paths
from .functional import (
    FunctionalTrace,
    a_power_direct,
    a_power_formula_backward,
    a_power_formula_forward,
    accumulate,
    compensator_rate,
)
from .series import (
    GridSpec,
    SeriesTable,
    fit_growth,
    kato_Ct,
    kernel_G,
    lemma_constants,
    qbar_recursion,
    qn_recursion,
    sum_series,
)
from .estimate import (
    BoundReport,
    DensityEstimate,
    Histogram,
    KernelSmoother,
    fit_two_sided,
    lower_bound_k,
    mc_density,
)

__version__ = "0.1.0"
