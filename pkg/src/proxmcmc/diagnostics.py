"""Post-hoc chain analysis: ACF, ESS, KL against 1-D targets, slow/fast
components, MSE traces, and cross-method speed-ups."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimate at lags 0..max_lag, acf[0] = 1."""
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if max_lag >= n:
        raise ValueError("max_lag must be smaller than the series length")
    xc = x - x.mean()
    var = np.dot(xc, xc)
    if var == 0.0:
        raise ValueError("constant series has no autocorrelation")
    m = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[: max_lag + 1]
    return acov / acov[0]


def effective_sample_size(series: np.ndarray) -> float:
    """ESS = n / (1 + 2 sum rho(k)) with Geyer's initial monotone truncation.

    Consecutive-lag pairs are summed while the pair sums stay positive and
    are clipped to be non-increasing.  Antithetic chains can report an ESS
    above n (super-efficient); callers flag that case.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError("series too short for an ESS estimate")
    rho = autocorrelation(x, n - 1)
    n_pairs = n // 2
    pair_sums = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    nonpos = np.nonzero(pair_sums <= 0.0)[0]
    cut = nonpos[0] if nonpos.size else n_pairs
    kept = np.minimum.accumulate(pair_sums[:cut]) if cut > 0 else pair_sums[:0]
    tau = -1.0 + 2.0 * kept.sum()
    tau = max(tau, 1.0 / n)
    return float(n / tau)


def is_supereffective(ess: float, n_samples: int) -> bool:
    """Marker for antithetic chains whose ESS estimate exceeds n."""
    return bool(ess > n_samples)


def _bin_masses(density: Callable, edges: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Per-bin target mass by midpoint quadrature, refined until stable."""
    widths = np.diff(edges)
    masses = None
    m = 4
    while True:
        offsets = (np.arange(m) + 0.5) / m
        points = edges[:-1, None] + offsets[None, :] * widths[:, None]
        new = np.asarray(density(points), dtype=float).mean(axis=1) * widths
        if masses is not None:
            scale = max(new.sum(), 1e-300)
            if np.abs(new - masses).max() <= tol * scale:
                masses = new
                break
        masses = new
        m *= 2
        if m > 1 << 16:
            break
    return masses


def kl_vs_target_1d(samples: np.ndarray, target_density: Callable,
                    n_bins: int, support: tuple[float, float]) -> float:
    """Discrete KL(empirical || binned target) over equal-width bins.

    Bins cover the support extended to the sample range; the target mass is
    renormalised over the binned interval, so an unnormalised density is
    fine.  Empty bins contribute zero (the p log p convention at p = 0).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if n_bins < 10:
        raise ValueError("need at least 10 bins")
    lo, hi = support
    span = hi - lo
    eps = 1e-9 * max(span, 1.0)
    lo = min(lo, x.min()) - eps
    hi = max(hi, x.max()) + eps
    edges = np.linspace(lo, hi, n_bins + 1)

    counts, _ = np.histogram(x, bins=edges)
    p = counts / counts.sum()
    q = _bin_masses(target_density, edges)
    q = q / q.sum()

    mask = p > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


class Components(NamedTuple):
    slow: np.ndarray
    fast: np.ndarray
    fast_reliable: bool


def slow_fast_components(samples: np.ndarray, seed: int = 0,
                         leading_iters: int = 60, trailing_iters: int = 300,
                         tol: float = 1e-11) -> Components:
    """Leading and trailing singular directions of the centred sample matrix.

    The leading direction comes from a randomized range finder with blocked
    subspace iteration; the trailing one from power iteration on the
    shifted covariance s1^2 I - C.  Iterations stop early once the
    direction moves by less than ``tol``; pass ``tol=0`` to use the full
    budget.  A rank-deficient sample matrix flags the trailing direction as
    unreliable.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("need >= 2 samples of dimension >= 2")
    n, d = x.shape
    xc = x - x.mean(axis=0)
    scale = 1.0 / (n - 1)

    def cov_apply(v):
        return (xc.T @ (xc @ v)) * scale

    rng = np.random.Generator(np.random.Philox(seed))
    block = min(d, 6)
    q, _ = np.linalg.qr(rng.standard_normal((d, block)))
    slow = q[:, 0]
    for _ in range(leading_iters):
        q, _ = np.linalg.qr(cov_apply(q))
        small = q.T @ cov_apply(q)
        eigvals, eigvecs = np.linalg.eigh((small + small.T) / 2.0)
        new_slow = q @ eigvecs[:, -1]
        # |dot| can round above 1 at convergence; clamp so tol=0 means
        # "use the full budget".
        moved = max(0.0, 1.0 - abs(new_slow @ slow))
        slow = new_slow
        if moved < tol:
            break
    slow = slow / np.linalg.norm(slow)
    s1_sq = float(slow @ cov_apply(slow))

    shift = s1_sq * (1.0 + 1e-9)
    v = rng.standard_normal(d)
    v -= slow * (slow @ v)
    v /= np.linalg.norm(v)
    for _ in range(trailing_iters):
        w = shift * v - cov_apply(v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        w /= norm
        moved = max(0.0, 1.0 - abs(w @ v))
        v = w
        if moved < tol:
            break
    fast = v / np.linalg.norm(v)
    smallest_eig = float(fast @ cov_apply(fast))
    reliable = smallest_eig > 1e-12 * max(s1_sq, 1e-300)

    # Fix signs for reproducibility.
    if slow[np.argmax(np.abs(slow))] < 0:
        slow = -slow
    if fast[np.argmax(np.abs(fast))] < 0:
        fast = -fast
    return Components(slow=slow, fast=fast, fast_reliable=reliable)


def mse_trace(samples: np.ndarray, truth: np.ndarray,
              budget_per_sample: int) -> np.ndarray:
    """Running posterior-mean MSE against the truth vs gradient budget.

    Row k holds (cumulative gradient evaluations, ||mean_k - truth||^2 / d).
    """
    x = np.asarray(samples, dtype=float)
    truth = np.asarray(truth, dtype=float).ravel()
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if truth.size != d:
        raise ValueError("truth dimension does not match the samples")
    running = np.cumsum(x, axis=0) / np.arange(1, n + 1)[:, None]
    mse = np.sum((running - truth) ** 2, axis=1) / d
    budgets = np.arange(1, n + 1, dtype=float) * budget_per_sample
    return np.column_stack([budgets, mse])


@dataclass
class ComponentStats:
    ess: float
    acf: np.ndarray
    supereffective: bool = False


@dataclass
class DiagnosticsReport:
    """Per-chain summary consumed by the cross-method comparison."""

    components: dict[str, ComponentStats]
    gradient_evals: int
    n_samples: int
    directions: dict[str, np.ndarray] = field(default_factory=dict)
    kl_divergence: float | None = None
    mse: np.ndarray | None = None
    label: str = ""


def build_report(samples: np.ndarray, gradient_evals: int, max_lag: int = 100,
                 target_density: Callable | None = None,
                 kl_bins: int = 100,
                 kl_support: tuple[float, float] | None = None,
                 truth: np.ndarray | None = None,
                 budget_per_sample: int | None = None,
                 label: str = "",
                 direction_seed: int = 0) -> DiagnosticsReport:
    """Assemble a DiagnosticsReport from stored samples.

    One-dimensional chains report a single 'chain' component; otherwise the
    slow/fast projections of the sample covariance are analysed.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    lag = min(max_lag, n - 1)

    components: dict[str, ComponentStats] = {}
    directions: dict[str, np.ndarray] = {}
    if d == 1:
        series = {"chain": x[:, 0]}
    else:
        comp = slow_fast_components(x, seed=direction_seed)
        directions = {"slow": comp.slow, "fast": comp.fast}
        series = {"slow": x @ comp.slow, "fast": x @ comp.fast}
    for name, s in series.items():
        ess = effective_sample_size(s)
        components[name] = ComponentStats(
            ess=ess,
            acf=autocorrelation(s, lag),
            supereffective=is_supereffective(ess, n),
        )

    kl = None
    if target_density is not None and d == 1:
        if kl_support is None:
            raise ValueError("kl_support required when a target density is given")
        kl = kl_vs_target_1d(x[:, 0], target_density, kl_bins, kl_support)

    mse = None
    if truth is not None:
        if budget_per_sample is None:
            raise ValueError("budget_per_sample required for an MSE trace")
        mse = mse_trace(x, truth, budget_per_sample)

    return DiagnosticsReport(
        components=components,
        gradient_evals=gradient_evals,
        n_samples=n,
        directions=directions,
        kl_divergence=kl,
        mse=mse,
        label=label,
    )


def speedup_report(reference: DiagnosticsReport,
                   candidate: DiagnosticsReport) -> dict[str, float]:
    """Candidate-over-reference ESS ratio per shared component.

    Both reports must come from equal gradient-evaluation budgets.
    """
    if reference.gradient_evals != candidate.gradient_evals:
        raise ValueError(
            f"gradient budgets differ: reference {reference.gradient_evals}, "
            f"candidate {candidate.gradient_evals}")
    shared = set(reference.components) & set(candidate.components)
    if not shared:
        raise ValueError("reports share no components")
    return {name: candidate.components[name].ess / reference.components[name].ess
            for name in sorted(shared)}
