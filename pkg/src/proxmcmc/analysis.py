"""Closed-form convergence and stability analysis on diagonal Gaussian targets.

A one-step integrator acts on each axis as
    X_{n+1} = r1(z) X_n + sqrt(2 delta) r2(z) xi,   z = -delta / sigma^2,
so the chain law, the squared 2-Wasserstein distance to the target, the
numerical invariant measure, and the contraction constant all have closed
forms in terms of the stability functions (r1, r2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chebyshev import cheb_t, cheb_t_derivative, cheb_u, stability_interval
from .models import GaussianTarget


class DivergentChainError(ValueError):
    """The linear recursion diverges: |r1(z)| >= 1 on some axis."""


class UnreachableAccuracyError(RuntimeError):
    """The asymptotic bias floor exceeds the requested accuracy."""

    def __init__(self, message, floor=None, threshold=None):
        super().__init__(message)
        self.floor = floor
        self.threshold = threshold


@dataclass(frozen=True)
class StabilityFunctions:
    """The (r1, r2) pair characterising one integrator on linear test problems."""

    r1: Callable[[np.ndarray], np.ndarray]
    r2: Callable[[np.ndarray], np.ndarray]
    method: str
    stages: int = 1
    eta: float = 0.0

    @property
    def evals_per_iteration(self) -> int:
        return self.stages if self.method == "SKROCK" else 1


def stability_em() -> StabilityFunctions:
    """Euler-Maruyama: r1(z) = 1 + z, r2(z) = 1."""
    return StabilityFunctions(
        r1=lambda z: 1.0 + np.asarray(z, dtype=float),
        r2=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        method="EM",
    )


def stability_skrock(s: int, eta: float = 0.05) -> StabilityFunctions:
    """Stabilised s-stage kernel: Chebyshev ratio r1 and damped-noise r2."""
    if s < 1:
        raise ValueError("stage count must be >= 1")
    omega0 = 1.0 + eta / s**2
    omega1 = cheb_t(s, omega0) / cheb_t_derivative(s, omega0)
    t_norm = cheb_t(s, omega0)
    u_norm = cheb_u(s - 1, omega0)

    def r1(z):
        return cheb_t(s, omega0 + omega1 * np.asarray(z, dtype=float)) / t_norm

    def r2(z):
        z = np.asarray(z, dtype=float)
        return cheb_u(s - 1, omega0 + omega1 * z) / u_norm * (1.0 + 0.5 * omega1 * z)

    return StabilityFunctions(r1=r1, r2=r2, method="SKROCK", stages=s, eta=eta)


def _geometric_ratio(r1_sq: np.ndarray, n: int) -> np.ndarray:
    """(1 - r1^{2n}) / (1 - r1^2), evaluated stably.

    Powers go through log-magnitude space so large n cannot underflow to
    garbage, and the r1^2 -> 1 axis takes its analytic limit n.
    """
    a = np.asarray(r1_sq, dtype=float)
    out = np.empty_like(a)
    near_one = np.abs(1.0 - a) < 1e-14
    with np.errstate(divide="ignore"):
        log_a = np.log(np.where(a > 0, a, 1.0))
    a_n = np.where(a > 0, np.exp(n * log_a), 0.0 if n > 0 else 1.0)
    safe = ~near_one
    out[safe] = (1.0 - a_n[safe]) / (1.0 - a[safe])
    out[near_one] = float(n)
    return out


def _r1_pow_2n(r1_sq: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(r1_sq, dtype=float)
    if n == 0:
        return np.ones_like(a)
    with np.errstate(divide="ignore"):
        log_a = np.log(np.where(a > 0, a, 1.0))
    return np.where(a > 0, np.exp(n * log_a), 0.0)


def chain_law(target: GaussianTarget, stab: StabilityFunctions, delta: float,
              x0: np.ndarray, n: int):
    """Per-axis mean and variance of the chain after n iterations."""
    if n < 0:
        raise ValueError("n must be >= 0")
    z = -delta / target.variances
    r1 = np.atleast_1d(stab.r1(z))
    r2 = np.atleast_1d(stab.r2(z))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), target.variances.shape)
    means = r1**n * x0
    variances = 2.0 * delta * r2**2 * _geometric_ratio(r1**2, n)
    return means, variances


@dataclass(frozen=True)
class W2Result:
    """Per-axis decomposition of the squared 2-Wasserstein distance."""

    d_terms: np.ndarray
    b_terms: np.ndarray

    @property
    def total(self) -> float:
        return float(self.d_terms.sum() + self.b_terms.sum())


def _check_contractive(r1: np.ndarray) -> None:
    bad = np.abs(r1) >= 1.0
    if np.any(bad):
        raise DivergentChainError(
            f"|r1(z)| >= 1 on {int(bad.sum())} axis/axes; the chain diverges")


def w2_distance(target: GaussianTarget, stab: StabilityFunctions, delta: float,
                x0: np.ndarray, n: int) -> W2Result:
    """Squared W2 distance between the target and the n-step chain law.

    Per axis: D_n = r1^{2n} x0^2 and B_n = (sigma - std_n)^2, where std_n is
    the chain's standard deviation after n steps.  For n > 0 every axis must
    satisfy |r1(z)| < 1.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    z = -delta / target.variances
    r1 = np.atleast_1d(stab.r1(z))
    r2 = np.atleast_1d(stab.r2(z))
    if n > 0:
        _check_contractive(r1)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), target.variances.shape)
    sigma = np.sqrt(target.variances)
    d_terms = _r1_pow_2n(r1**2, n) * x0**2
    std_n = np.sqrt(2.0 * delta * r2**2 * _geometric_ratio(r1**2, n))
    b_terms = (sigma - std_n) ** 2
    return W2Result(d_terms=d_terms, b_terms=b_terms)


def numerical_invariant(target: GaussianTarget, stab: StabilityFunctions,
                        delta: float) -> GaussianTarget:
    """Stationary law of the discretised chain: N(0, 2 delta r2^2 / (1 - r1^2))."""
    z = -delta / target.variances
    r1 = np.atleast_1d(stab.r1(z))
    r2 = np.atleast_1d(stab.r2(z))
    _check_contractive(r1)
    variances = 2.0 * delta * r2**2 / (1.0 - r1**2)
    return GaussianTarget(variances=variances)


def contraction_constant(target: GaussianTarget, stab: StabilityFunctions,
                         delta: float) -> float:
    """Convergence-rate constant C = max_i r1(z_i)^2."""
    z = -delta / target.variances
    r1 = np.atleast_1d(stab.r1(z))
    return float(np.max(r1**2))


def gaussian_w2_sq(mean_a, var_a, mean_b, var_b) -> float:
    """Squared W2 distance between two diagonal Gaussians."""
    mean_a, mean_b = np.asarray(mean_a, float), np.asarray(mean_b, float)
    var_a, var_b = np.asarray(var_a, float), np.asarray(var_b, float)
    return float(np.sum((mean_a - mean_b) ** 2)
                 + np.sum((np.sqrt(var_a) - np.sqrt(var_b)) ** 2))


def optimal_stage_and_step(kappa: float, eta: float, ell: float) -> tuple[int, float]:
    """Stage count and step minimising the contraction constant for condition kappa.

    s rounds sqrt(eta (kappa - 1) / 2) to the nearest integer (at least 1);
    the step delta = (omega0 - 1) / (ell * omega1) pins the slowest axis at
    the edge of the Chebyshev window.  ``ell`` is the smallest curvature,
    1 / sigma_max^2.
    """
    if kappa < 1:
        raise ValueError("condition number must be >= 1")
    if ell <= 0:
        raise ValueError("ell must be > 0")
    s = max(1, int(np.floor(np.sqrt(eta * (kappa - 1.0) / 2.0) + 0.5)))
    omega0 = 1.0 + eta / s**2
    omega1 = cheb_t(s, omega0) / cheb_t_derivative(s, omega0)
    delta = (omega0 - 1.0) / (ell * omega1)
    return s, float(delta)


def gradient_budget_curve(target: GaussianTarget, method: str, epsilon: float,
                          x0: np.ndarray, eta: float = 0.05,
                          em_safety: float = 1.0,
                          max_gradient_evals: int = 10**9) -> int:
    """Smallest gradient budget with W2(pi, Q_n)^2 < epsilon^2 W2(pi, Q_0)^2.

    The Euler kernel runs at delta = em_safety * 2/(L + ell); the stabilised
    kernel at the stage count and step from ``optimal_stage_and_step``.  The
    scan walks the closed form, so no sampling is involved.  If the
    asymptotic bias floor already exceeds the threshold the accuracy is
    unreachable and reported as such.

    The rounded stage count can land the fastest axis just outside the
    Chebyshev window (the underlying inequality needs kappa <= 1 + 2 s^2 /
    eta, i.e. rounding up); one extra stage restores it.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    variances = target.variances
    big_l = 1.0 / variances.min()
    ell = 1.0 / variances.max()
    if method == "EM":
        delta = em_safety * 2.0 / (big_l + ell)
        stab = stability_em()
    elif method == "SKROCK":
        kappa = target.condition_number
        s, delta = optimal_stage_and_step(kappa, eta, ell)
        stab = stability_skrock(s, eta)
        if np.any(np.abs(np.atleast_1d(stab.r1(-delta / variances))) >= 1.0):
            s += 1
            omega0 = 1.0 + eta / s**2
            omega1 = cheb_t(s, omega0) / cheb_t_derivative(s, omega0)
            delta = (omega0 - 1.0) / (ell * omega1)
            stab = stability_skrock(s, eta)
    else:
        raise ValueError(f"unknown method {method!r}")
    evals_per_iter = stab.evals_per_iteration

    x0 = np.broadcast_to(np.asarray(x0, dtype=float), variances.shape)
    w2_start = w2_distance(target, stab, delta, x0, 0).total
    threshold = epsilon**2 * w2_start
    if w2_start < threshold:
        return 0

    z = -delta / variances
    r1 = np.atleast_1d(stab.r1(z))
    _check_contractive(r1)
    r2 = np.atleast_1d(stab.r2(z))
    sigma = np.sqrt(variances)

    std_inf = np.sqrt(2.0 * delta * r2**2 / (1.0 - r1**2))
    floor = float(np.sum((sigma - std_inf) ** 2))
    if floor >= threshold:
        raise UnreachableAccuracyError(
            f"asymptotic bias floor {floor:.6g} exceeds threshold {threshold:.6g}",
            floor=floor, threshold=threshold)

    # Chunked scan of the closed form over n.
    a = r1**2
    with np.errstate(divide="ignore"):
        log_a = np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), -np.inf)
    ratio_inf = 1.0 / (1.0 - a)
    chunk = 1024
    n_start = 1
    max_iters = max_gradient_evals // evals_per_iter
    while n_start <= max_iters:
        ns = np.arange(n_start, min(n_start + chunk, max_iters + 1))
        a_n = np.exp(np.outer(ns, log_a))            # (chunk, d)
        d_terms = a_n * x0**2
        std_n = np.sqrt(2.0 * delta * r2**2 * ratio_inf * (1.0 - a_n))
        b_terms = (sigma - std_n) ** 2
        totals = d_terms.sum(axis=1) + b_terms.sum(axis=1)
        hit = np.nonzero(totals < threshold)[0]
        if hit.size:
            return int(ns[hit[0]]) * evals_per_iter
        n_start = int(ns[-1]) + 1
    raise UnreachableAccuracyError(
        f"budget cap {max_gradient_evals} reached before the threshold",
        floor=floor, threshold=threshold)


def ms_stability_region(stab: StabilityFunctions, p_grid, q2_grid) -> np.ndarray:
    """Mean-square stability on the test-equation grid.

    Entry [i, j] is True iff R(p_i, q2_j) = r1(p_i)^2 + r2(p_i)^2 q2_j < 1.
    The true domain of the underlying equation is 2p + q^2 < 0.
    """
    p = np.asarray(p_grid, dtype=float)
    q2 = np.asarray(q2_grid, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q2))):
        raise ValueError("grids must be finite")
    r1_sq = np.atleast_1d(stab.r1(p)) ** 2
    r2_sq = np.atleast_1d(stab.r2(p)) ** 2
    return (r1_sq[:, None] + r2_sq[:, None] * q2[None, :]) < 1.0


def skrock_stable_extent(s: int, eta: float = 0.05) -> float:
    """Damped-interval length l_s, the guaranteed drift-stability extent."""
    return stability_interval(s, eta)
