"""Concrete target models pi(x) ∝ exp(-f(x) - g(x)) and their smoothed surrogates.

A model bundles the smooth part (gradient + Lipschitz constant), the
non-smooth part as a proximal operator, and the smoothing parameter lam.
Models without a penalty use ``g=None`` and ``lam=inf`` so the total
Lipschitz constant L = L_f + 1/lam still reads literally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import LinearOperator
from .prox import (
    ProxOperator,
    box_indicator_prox,
    composite_prox,
    l1_prox,
    tv_prox,
)


class ChainDivergenceError(RuntimeError):
    """Raised when a chain produces non-finite values (poisoned chain)."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None
                         else f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class PosteriorModel:
    """A target density with smooth gradient and prox-equipped penalty.

    ``gradient_evals`` tallies calls to the regularised gradient; it is the
    only mutable state and is bumped under the interpreter lock, so models
    are safe to share between threads that only evaluate gradients.
    """

    dimension: int
    grad_f: Callable[[np.ndarray], np.ndarray]
    lipschitz_f: float
    lam: float
    g: ProxOperator | None
    log_density_smooth: Callable[[np.ndarray], float]
    name: str = ""
    image_shape: tuple[int, int] | None = None
    gradient_evals: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("smoothing parameter must be > 0")
        if self.lipschitz_f < 0:
            raise ValueError("Lipschitz constant must be >= 0")

    @property
    def total_lipschitz(self) -> float:
        """Lipschitz constant L = L_f + 1/lam of the regularised gradient."""
        return self.lipschitz_f + (0.0 if self.g is None else 1.0 / self.lam)

    def prox_g(self, x: np.ndarray) -> np.ndarray:
        if self.g is None:
            return np.asarray(x, dtype=float)
        return self.g.evaluate(np.asarray(x, dtype=float), self.lam)

    def penalty_value(self, x: np.ndarray) -> float:
        return 0.0 if self.g is None else self.g.penalty_value(x)

    def envelope_value(self, x: np.ndarray) -> float:
        """Moreau-Yosida envelope of g at x (0 for penalty-free models)."""
        if self.g is None:
            return 0.0
        x = np.asarray(x, dtype=float)
        p = self.prox_g(x)
        return float(self.g.penalty_value(p) + np.sum((x - p) ** 2) / (2.0 * self.lam))

    def log_density_regularised(self, x: np.ndarray) -> float:
        """Unnormalised log pi^lam(x) = -f(x) - g^lam(x), the trace statistic."""
        return float(self.log_density_smooth(x)) - self.envelope_value(x)


def regularised_log_gradient(model: PosteriorModel, x: np.ndarray) -> np.ndarray:
    """Gradient of log pi^lam: -grad f(x) - (x - prox(x)) / lam.

    Counts one gradient evaluation; non-finite output poisons the chain.
    """
    model.gradient_evals += 1
    x = np.asarray(x, dtype=float)
    grad = -model.grad_f(x)
    if model.g is not None:
        grad = grad - (x - model.g.evaluate(x, model.lam)) / model.lam
    if not np.all(np.isfinite(grad)):
        raise ChainDivergenceError("non-finite regularised gradient")
    return grad


def model_gaussian(variances) -> PosteriorModel:
    """Zero-mean Gaussian with diagonal covariance; no non-smooth part."""
    variances = np.atleast_1d(np.asarray(variances, dtype=float))
    if np.any(variances <= 0):
        raise ValueError("variances must be strictly positive")
    inv_var = 1.0 / variances

    return PosteriorModel(
        dimension=variances.size,
        grad_f=lambda x: x * inv_var,
        lipschitz_f=float(inv_var.max()),
        lam=float("inf"),
        g=None,
        log_density_smooth=lambda x: float(-0.5 * np.sum(x * x * inv_var)),
        name="gaussian",
    )


def model_laplace_1d(scale: float = 1.0, lam: float = 1e-5) -> PosteriorModel:
    """One-dimensional Laplace target |x|/scale, smooth part absent."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    return PosteriorModel(
        dimension=1,
        grad_f=lambda x: np.zeros_like(x),
        lipschitz_f=0.0,
        lam=lam,
        g=l1_prox(1.0 / scale),
        log_density_smooth=lambda x: 0.0,
        name="laplace1d",
    )


def model_uniform_1d(lam: float = 1e-5) -> PosteriorModel:
    """One-dimensional uniform target on [-1, 1] via its indicator."""
    return PosteriorModel(
        dimension=1,
        grad_f=lambda x: np.zeros_like(x),
        lipschitz_f=0.0,
        lam=lam,
        g=box_indicator_prox(-1.0, 1.0),
        log_density_smooth=lambda x: 0.0,
        name="uniform1d",
    )


def _gaussian_likelihood_parts(op: LinearOperator, y: np.ndarray, sigma: float):
    inv_var = 1.0 / sigma**2

    def grad_f(x):
        return op.apply_adjoint(op.apply(x) - y) * inv_var

    def log_smooth(x):
        r = op.apply(x) - y
        return float(-0.5 * inv_var * np.sum(r * r))

    return grad_f, log_smooth, float(op.operator_norm_sq * inv_var)


def model_deconvolution(y: np.ndarray, blur: LinearOperator, sigma: float,
                        beta: float, lam: float | None = None) -> PosteriorModel:
    """Deblurring posterior: Gaussian likelihood through ``blur`` plus a TV prior.

    ``lam`` defaults to 1/L_f, the recommended smoothing level.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ValueError("observation must be a 2-D image")
    if y.size != blur.out_dim:
        raise ValueError("observation shape does not match the blur operator")
    if sigma <= 0 or beta <= 0:
        raise ValueError("sigma and beta must be > 0")

    grad_f, log_smooth, lipschitz = _gaussian_likelihood_parts(blur, y.ravel(), sigma)
    if lam is None:
        lam = 1.0 / lipschitz
    return PosteriorModel(
        dimension=blur.in_dim,
        grad_f=grad_f,
        lipschitz_f=lipschitz,
        lam=float(lam),
        g=tv_prox(beta, y.shape),
        log_density_smooth=log_smooth,
        name="deconvolution",
        image_shape=y.shape,
    )


def model_unmixing(y: np.ndarray, mixing: LinearOperator, sigma: float,
                   alpha: float, beta: float, map_shape: tuple[int, int],
                   lam: float | None = None,
                   prox_order: tuple[str, ...] = ("tv", "l1", "positivity"),
                   ) -> PosteriorModel:
    """Abundance posterior: linear mixing likelihood with l1 + TV + positivity.

    The composite prox is the sequential composition of the three individual
    proxes in ``prox_order`` (an approximation of the joint prox; the default
    order applies TV first, then soft-thresholding, then the projection).
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != mixing.out_dim:
        raise ValueError("observation size does not match the mixing operator")
    if min(sigma, alpha, beta) <= 0:
        raise ValueError("sigma, alpha, beta must be > 0")
    rows, cols = map_shape
    n_pixels = rows * cols
    if mixing.in_dim % n_pixels != 0:
        raise ValueError("map shape does not divide the abundance dimension")
    k = mixing.in_dim // n_pixels

    grad_f, log_smooth, lipschitz = _gaussian_likelihood_parts(mixing, y, sigma)
    if lam is None:
        lam = 1.0 / lipschitz
    parts = {
        "tv": tv_prox(beta, map_shape, n_maps=k),
        "l1": l1_prox(alpha),
        "positivity": box_indicator_prox(0.0, float("inf")),
    }
    return PosteriorModel(
        dimension=mixing.in_dim,
        grad_f=grad_f,
        lipschitz_f=lipschitz,
        lam=float(lam),
        g=composite_prox([parts[p] for p in prox_order]),
        log_density_smooth=log_smooth,
        name="unmixing",
        image_shape=map_shape,
    )


def model_tomography(y: np.ndarray, mask_op: LinearOperator, sigma: float,
                     beta: float, image_shape: tuple[int, int],
                     lam: float | None = None) -> PosteriorModel:
    """Fourier-subsampling posterior with a TV prior.

    ``y`` stacks the real and imaginary parts of the retained coefficients.
    The subsampled unitary transform has unit norm, so L_f = 1/sigma^2.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != mask_op.out_dim:
        raise ValueError("observation size does not match the mask operator")
    if sigma <= 0 or beta <= 0:
        raise ValueError("sigma and beta must be > 0")
    rows, cols = image_shape
    if rows * cols != mask_op.in_dim:
        raise ValueError("image shape does not match the mask operator")

    grad_f, log_smooth, lipschitz = _gaussian_likelihood_parts(mask_op, y, sigma)
    if lam is None:
        lam = 1.0 / lipschitz
    return PosteriorModel(
        dimension=mask_op.in_dim,
        grad_f=grad_f,
        lipschitz_f=lipschitz,
        lam=float(lam),
        g=tv_prox(beta, image_shape),
        log_density_smooth=log_smooth,
        name="tomography",
        image_shape=image_shape,
    )


@dataclass(frozen=True)
class GaussianTarget:
    """Diagonal Gaussian used by the closed-form convergence analysis."""

    variances: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        variances = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if np.any(variances <= 0):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "variances", variances)
        mean = (np.zeros_like(variances) if self.mean is None
                else np.asarray(self.mean, dtype=float))
        if mean.shape != variances.shape:
            raise ValueError("mean and variances must have equal length")
        object.__setattr__(self, "mean", mean)

    @property
    def dimension(self) -> int:
        return self.variances.size

    @property
    def condition_number(self) -> float:
        return float(self.variances.max() / self.variances.min())
