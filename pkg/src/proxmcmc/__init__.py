"""Proximal Langevin MCMC with explicit stabilised kernels.

Samples log-concave targets pi(x) ∝ exp(-f(x) - g(x)) whose non-smooth part
g enters through its Moreau-Yosida envelope.  Two kernels are provided: the
Euler-Maruyama discretisation (MYULA) and a stabilised s-stage
Runge-Kutta-Chebyshev discretisation (SK-ROCK) whose stability interval
grows quadratically with the stage count.  Closed-form Gaussian convergence
and mean-square stability analyses, chain diagnostics, and an experiment
CLI round out the package.
"""

from .analysis import (
    DivergentChainError,
    StabilityFunctions,
    UnreachableAccuracyError,
    W2Result,
    chain_law,
    contraction_constant,
    gaussian_w2_sq,
    gradient_budget_curve,
    ms_stability_region,
    numerical_invariant,
    optimal_stage_and_step,
    stability_em,
    stability_skrock,
    w2_distance,
)
from .chebyshev import (
    ChebCoefficients,
    cheb_t,
    cheb_t_derivative,
    cheb_u,
    make_coefficients,
    stability_interval,
)
from .diagnostics import (
    DiagnosticsReport,
    autocorrelation,
    build_report,
    effective_sample_size,
    kl_vs_target_1d,
    mse_trace,
    slow_fast_components,
    speedup_report,
)
from .models import (
    ChainDivergenceError,
    GaussianTarget,
    PosteriorModel,
    model_deconvolution,
    model_gaussian,
    model_laplace_1d,
    model_tomography,
    model_uniform_1d,
    model_unmixing,
    regularised_log_gradient,
)
from .operators import (
    LinearOperator,
    load_endmembers_csv,
    make_blur,
    make_fourier_mask,
    make_mixing,
    spectral_norm_sq,
)
from .prox import (
    MoreauEnvelope,
    ProxOperator,
    box_indicator_prox,
    composite_prox,
    l1_prox,
    my_envelope_gradient,
    project_box,
    prox_tv,
    soft_threshold,
    tv_prox,
    tv_value,
    zero_prox,
)
from .samplers import (
    KERNEL_MYULA,
    KERNEL_SKROCK,
    ChainTrace,
    SamplerConfig,
    StepSizeError,
    max_stepsize,
    myula_step,
    run_chain,
    skrock_step,
    validate_stepsize,
)

__version__ = "0.1.0"
