"""The two Markov kernels and the chain runner.

One step of either kernel consumes exactly one fresh standard-normal vector,
drawn from a counter-based generator in a fixed order, so traces are
bit-reproducible for a given seed regardless of how many chains run in
parallel elsewhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .chebyshev import ChebCoefficients, make_coefficients, stability_interval
from .models import ChainDivergenceError, PosteriorModel, regularised_log_gradient

KERNEL_MYULA = "MYULA"
KERNEL_SKROCK = "SKROCK"
KERNELS = (KERNEL_MYULA, KERNEL_SKROCK)


class StepSizeError(ValueError):
    """Step size violates the kernel's stability bound."""


@dataclass(frozen=True)
class SamplerConfig:
    """Everything needed to reproduce one chain."""

    kernel: str
    delta: float
    n_iterations: int
    stages: int = 1
    eta: float = 0.05
    seed: int = 0
    burn_in: int = 0
    thinning: int = 1
    store_trace_statistic: bool = False

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.delta <= 0:
            raise ValueError("step size must be > 0")
        if self.n_iterations < 0:
            raise ValueError("iteration count must be >= 0")
        if self.kernel == KERNEL_SKROCK and self.stages < 1:
            raise ValueError("stage count must be >= 1")
        if self.burn_in < 0 or self.burn_in > self.n_iterations:
            raise ValueError("burn-in must be in [0, n_iterations]")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass
class ChainTrace:
    """Stored samples plus scalar summaries of one chain run."""

    samples: np.ndarray
    trace_statistic: np.ndarray | None
    gradient_evals: int
    wall_time: float
    config: SamplerConfig
    initial_state: np.ndarray

    @property
    def stored_iterations(self) -> int:
        return self.samples.shape[0]

    def stored_iteration_indices(self) -> np.ndarray:
        """Global iteration number of each stored sample."""
        cfg = self.config
        return cfg.burn_in + cfg.thinning * np.arange(1, self.stored_iterations + 1)


def max_stepsize(model: PosteriorModel, kernel: str, s: int = 1,
                 eta: float = 0.05) -> float:
    """Largest admissible step: 2/L for the Euler kernel (exclusive bound),
    l_s/L for the s-stage kernel (inclusive).

    The one-stage stabilised kernel has the Euler mean recursion, so it
    inherits the Euler bound (the l_s formula is only meaningful for s >= 2).
    """
    big_l = model.total_lipschitz
    if big_l <= 0:
        return float("inf")
    if kernel == KERNEL_MYULA:
        return 2.0 / big_l
    if kernel == KERNEL_SKROCK:
        if s < 1:
            raise ValueError("stage count must be >= 1")
        if s == 1:
            return 2.0 / big_l
        return stability_interval(s, eta) / big_l
    raise ValueError(f"unknown kernel {kernel!r}")


def validate_stepsize(model: PosteriorModel, config: SamplerConfig) -> None:
    """Reject configurations outside the stability bound before any sampling."""
    bound = max_stepsize(model, config.kernel, config.stages, config.eta)
    if config.kernel == KERNEL_MYULA:
        if not config.delta < bound:
            raise StepSizeError(
                f"delta={config.delta:g} violates the MYULA bound delta < {bound:g}")
    else:
        if config.delta > bound * (1.0 + 1e-12):
            raise StepSizeError(
                f"delta={config.delta:g} violates the SK-ROCK bound "
                f"delta <= {bound:g} (s={config.stages})")


def myula_step(model: PosteriorModel, x: np.ndarray, delta: float,
               noise: np.ndarray) -> np.ndarray:
    """One Euler-Maruyama step on the smoothed target; one gradient evaluation."""
    x = np.asarray(x, dtype=float)
    new = x + delta * regularised_log_gradient(model, x) + np.sqrt(2.0 * delta) * noise
    if not np.all(np.isfinite(new)):
        raise ChainDivergenceError("non-finite chain state")
    return new


def skrock_step(model: PosteriorModel, x: np.ndarray, coeffs: ChebCoefficients,
                delta: float, noise: np.ndarray) -> np.ndarray:
    """One s-stage stabilised step; exactly s gradient evaluations.

    The single noise vector enters stage 1 twice (inside the gradient
    argument and additively); later stages are deterministic recombinations.
    """
    x = np.asarray(x, dtype=float)
    root = np.sqrt(2.0 * delta) * noise
    mu, nu, k = coeffs.mu, coeffs.nu, coeffs.k

    k_prev2 = x
    k_prev = x + mu[0] * delta * regularised_log_gradient(model, x + nu[0] * root) \
        + k[0] * root
    for j in range(2, coeffs.s + 1):
        k_cur = mu[j - 1] * delta * regularised_log_gradient(model, k_prev) \
            + nu[j - 1] * k_prev + k[j - 1] * k_prev2
        if not np.all(np.isfinite(k_cur)):
            raise ChainDivergenceError(f"non-finite stage value at stage {j}")
        k_prev2, k_prev = k_prev, k_cur
    if not np.all(np.isfinite(k_prev)):
        raise ChainDivergenceError("non-finite chain state")
    return k_prev


def run_chain(model: PosteriorModel, config: SamplerConfig,
              x0: np.ndarray) -> ChainTrace:
    """Run one chain: burn-in discarded, 1-in-thinning storage, seeded noise.

    Two runs with equal seed/config/model produce bit-identical traces.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != model.dimension:
        raise ValueError(
            f"initial state has dimension {x0.size}, model expects {model.dimension}")
    validate_stepsize(model, config)

    coeffs = None
    if config.kernel == KERNEL_SKROCK:
        coeffs = make_coefficients(config.stages, config.eta)

    d = model.dimension
    n_store = (config.n_iterations - config.burn_in) // config.thinning
    samples = np.empty((n_store, d))
    stats = np.empty(n_store) if config.store_trace_statistic else None

    rng = np.random.Generator(np.random.Philox(config.seed))
    evals_before = model.gradient_evals
    x = x0.copy()
    kept = 0
    start = time.perf_counter()
    for i in range(1, config.n_iterations + 1):
        noise = rng.standard_normal(d)
        try:
            if coeffs is None:
                x = myula_step(model, x, config.delta, noise)
            else:
                x = skrock_step(model, x, coeffs, config.delta, noise)
        except ChainDivergenceError as err:
            raise ChainDivergenceError(str(err), iteration=i) from err
        if i > config.burn_in and (i - config.burn_in) % config.thinning == 0:
            samples[kept] = x
            if stats is not None:
                stats[kept] = model.log_density_regularised(x)
            kept += 1

    return ChainTrace(
        samples=samples,
        trace_statistic=stats,
        gradient_evals=model.gradient_evals - evals_before,
        wall_time=time.perf_counter() - start,
        config=config,
        initial_state=x0,
    )
