"""Age-structured neuron network density dynamics.

Simulation of the delayed interaction model along characteristics,
stationary-state construction, discretized linearized generators with
spectral diagnostics, and the verification campaigns tying them together.
"""

from .errors import (
    BracketError,
    ClosureError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleDeltaError,
    IntegratorError,
    NeuroageError,
    RegimeError,
    UnsupportedOperationError,
)
from .kernels import (
    DelayKernel,
    DiracKernel,
    ExponentialKernel,
    GammaKernel,
    TabulatedKernel,
    discrete_weights,
    kernel_moment_check,
)
from .params import ModelParams
from .rates import (
    ConstantRate,
    RateModel,
    SmoothRate,
    StepRate,
    decay_modulus,
    validate_assumptions,
)
from .steady import SteadyState, discrete_stationary, psi_eval, solve_steady, steady_residual
from .transport import (
    ActivityHistory,
    DensityState,
    Trajectory,
    activity_delay,
    activity_no_delay,
    contraction_probe,
    run,
    step_advance,
)
from .linops import (
    OperatorMatrix,
    SpectrumReport,
    assemble,
    assemble_delay_block,
    assemble_smooth_nodelay,
    assemble_step,
    compute_spectrum,
    dissipative_part,
    semigroup_decay_probe,
)
from .experiments import (
    DecayFit,
    RegimeRow,
    basin_probe,
    decay_rate_fit,
    oracle_compare_constant_rate,
    regime_sweep,
)

__version__ = "0.1.0"
