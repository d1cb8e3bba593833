"""Chebyshev polynomials and the coefficient tables of the stabilised kernel.

Everything here is evaluated by the classic three-term recurrences in double
precision.  The damped parameters stay within ``1 + eta`` of 1, so the
recurrences are well conditioned for the stage counts we allow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Stage counts beyond this give no practical benefit and start to stress the
# recurrence; reject them outright.
MAX_STAGES = 100


def cheb_t(s: int, x):
    """Chebyshev polynomial of the first kind, T_s(x).

    Uses T_{k+1}(x) = 2 x T_k(x) - T_{k-1}(x) with T_0 = 1, T_1 = x.
    Accepts scalars or arrays.
    """
    if s < 0:
        raise ValueError("polynomial order must be >= 0")
    x = np.asarray(x, dtype=float)
    t_prev = np.ones_like(x)
    if s == 0:
        return float(t_prev) if t_prev.ndim == 0 else t_prev
    t_cur = x.copy()
    for _ in range(s - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return float(t_cur) if t_cur.ndim == 0 else t_cur


def cheb_u(s: int, x):
    """Chebyshev polynomial of the second kind, U_s(x).

    Uses U_{k+1}(x) = 2 x U_k(x) - U_{k-1}(x) with U_0 = 1, U_1 = 2x.
    """
    if s < 0:
        raise ValueError("polynomial order must be >= 0")
    x = np.asarray(x, dtype=float)
    u_prev = np.ones_like(x)
    if s == 0:
        return float(u_prev) if u_prev.ndim == 0 else u_prev
    u_cur = 2.0 * x
    for _ in range(s - 1):
        u_prev, u_cur = u_cur, 2.0 * x * u_cur - u_prev
    return float(u_cur) if u_cur.ndim == 0 else u_cur


def cheb_t_derivative(s: int, x):
    """Derivative of the first-kind polynomial, T_s'(x) = s U_{s-1}(x)."""
    if s < 1:
        raise ValueError("derivative needs order >= 1")
    u = cheb_u(s - 1, x)
    return s * u


def stability_interval(s: int, eta: float) -> float:
    """Length l_s of the damped stability interval of the s-stage kernel.

    l_s = (s - 0.5)^2 (2 - 4 eta / 3) - 1.5.  Positive for s >= 2; the
    one-stage kernel falls back to the Euler interval of length 2 (see
    ``samplers.max_stepsize``).
    """
    return (s - 0.5) ** 2 * (2.0 - 4.0 * eta / 3.0) - 1.5


@dataclass(frozen=True)
class ChebCoefficients:
    """Precomputed recurrence coefficients for one stage count.

    Arrays are indexed by stage - 1, i.e. ``mu[0]`` is the stage-1
    coefficient.  For j >= 2 the identity k_j = 1 - nu_j holds exactly.
    """

    s: int
    eta: float
    omega0: float
    omega1: float
    ls: float
    mu: np.ndarray
    nu: np.ndarray
    k: np.ndarray


def make_coefficients(s: int, eta: float = 0.05) -> ChebCoefficients:
    """Build the full coefficient table for an s-stage kernel.

    Raises ``ValueError`` for s outside [1, MAX_STAGES] or negative damping.
    """
    if s < 1:
        raise ValueError("stage count must be >= 1")
    if s > MAX_STAGES:
        raise ValueError(f"stage count capped at {MAX_STAGES}")
    if eta < 0:
        raise ValueError("damping must be >= 0")

    omega0 = 1.0 + eta / s**2
    omega1 = cheb_t(s, omega0) / cheb_t_derivative(s, omega0)

    # T_j(omega0) for j = 0..s, shared by every per-stage coefficient.
    t = np.empty(s + 1)
    t[0] = 1.0
    if s >= 1:
        t[1] = omega0
    for j in range(2, s + 1):
        t[j] = 2.0 * omega0 * t[j - 1] - t[j - 2]

    mu = np.empty(s)
    nu = np.empty(s)
    k = np.empty(s)
    mu[0] = omega1 / omega0
    nu[0] = s * omega1 / 2.0
    k[0] = s * omega1 / omega0
    for j in range(2, s + 1):
        mu[j - 1] = 2.0 * omega1 * t[j - 1] / t[j]
        nu[j - 1] = 2.0 * omega0 * t[j - 1] / t[j]
        k[j - 1] = -t[j - 2] / t[j]

    return ChebCoefficients(
        s=s,
        eta=eta,
        omega0=omega0,
        omega1=omega1,
        ls=stability_interval(s, eta),
        mu=mu,
        nu=nu,
        k=k,
    )
