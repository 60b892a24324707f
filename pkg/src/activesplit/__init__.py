"""Operator splitting for active scalar equations u_t + div(u v(u)) = A(u)
on periodic domains, with pseudo-spectral sub-flows and convergence studies."""

from .diagnostics import conservation_report, convergence_study, fit_rate, run_study
from .grid import (
    GridSpec,
    RealField,
    SpectralField,
    dealias,
    random_band_limited_field,
    sobolev_norm,
    spectral_derivative,
    to_real,
    to_spectral,
    transform,
)
from .operators import (
    ASpec,
    Burgers,
    ConvolutionKernel,
    CustomMultiplier,
    DerivativeTerm,
    FractionalLaplacian,
    MixedTerm,
    SQG,
    apply_A,
    check_admissibility,
    commutator_AB,
    velocity,
)
from .presets import PRESETS, Preset, make_preset
from .splitting import SplitConfig, evolve, godunov_step, reference_solution, strang_step
from .subflows import BFlowControl, b_rhs, phi_A, phi_B

__version__ = "0.1.0"
