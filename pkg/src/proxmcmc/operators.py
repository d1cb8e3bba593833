"""Linear observation operators for the imaging experiments.

Operators act on flat float64 vectors.  Complex-valued ranges are stacked
as (real, imaginary) so all inner products stay real.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LinearOperator:
    """A linear map with its adjoint and (an upper bound on) ||A||^2."""

    apply: Callable[[np.ndarray], np.ndarray]
    apply_adjoint: Callable[[np.ndarray], np.ndarray]
    operator_norm_sq: float
    in_dim: int
    out_dim: int
    name: str = ""


def make_blur(kernel: np.ndarray, image_shape: tuple[int, int]) -> LinearOperator:
    """Circular (periodic) convolution with ``kernel``, done in Fourier space.

    The kernel must be odd-sized in both directions and no larger than the
    image; the squared operator norm is the peak squared magnitude of its
    transfer function (exact, since the operator is diagonalised by the DFT).
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2:
        raise ValueError("kernel must be 2-D")
    kr, kc = kernel.shape
    rows, cols = image_shape
    if kr % 2 == 0 or kc % 2 == 0:
        raise ValueError("kernel dimensions must be odd")
    if kr > rows or kc > cols:
        raise ValueError("kernel larger than image")

    padded = np.zeros(image_shape)
    padded[:kr, :kc] = kernel
    # Centre the kernel on the (0, 0) pixel so the operator is a pure
    # convolution without shift.
    padded = np.roll(padded, (-(kr // 2), -(kc // 2)), axis=(0, 1))
    otf = np.fft.fft2(padded)
    otf_conj = np.conj(otf)
    d = rows * cols

    def apply(x):
        img = np.asarray(x, dtype=float).reshape(image_shape)
        return np.real(np.fft.ifft2(otf * np.fft.fft2(img))).ravel()

    def apply_adjoint(y):
        img = np.asarray(y, dtype=float).reshape(image_shape)
        return np.real(np.fft.ifft2(otf_conj * np.fft.fft2(img))).ravel()

    return LinearOperator(
        apply=apply,
        apply_adjoint=apply_adjoint,
        operator_norm_sq=float(np.max(np.abs(otf) ** 2)),
        in_dim=d,
        out_dim=d,
        name="blur",
    )


def _radial_indices(image_shape, n_keep, rng):
    """Seeded pseudo-tomographic mask: random lines through DC.

    Lines at seeded angles are rasterised outward from the DC coefficient;
    indices are accumulated in (line, radius) order until exactly ``n_keep``
    distinct coefficients are selected.  DC is always first.
    """
    rows, cols = image_shape
    reach = int(np.hypot(rows, cols) / 2) + 2
    radii = np.arange(0.0, reach, 0.5)
    selected = [0]
    seen = {0}
    while len(selected) < n_keep:
        theta = rng.uniform(0.0, np.pi)
        dr, dc = np.cos(theta), np.sin(theta)
        for t in radii:
            for sign in (1.0, -1.0):
                ri = int(round(sign * t * dr)) % rows
                ci = int(round(sign * t * dc)) % cols
                flat = ri * cols + ci
                if flat not in seen:
                    seen.add(flat)
                    selected.append(flat)
                    if len(selected) == n_keep:
                        return np.array(selected, dtype=np.intp)
    return np.array(selected[:n_keep], dtype=np.intp)


def make_fourier_mask(image_shape: tuple[int, int], keep_fraction: float,
                      seed: int, pattern: str = "radial") -> LinearOperator:
    """Unitary 2-D DFT followed by selection of ceil(keep_fraction * d) coefficients.

    The selection pattern is a seeded radial-line mask including DC
    (``pattern="radial"``) or a seeded uniform draw (``pattern="uniform"``).
    The range is complex; outputs stack real and imaginary parts, so the
    operator maps R^d -> R^{2p} with squared norm 1.
    """
    rows, cols = image_shape
    d = rows * cols
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    n_keep = int(np.ceil(keep_fraction * d))

    rng = np.random.Generator(np.random.Philox(seed))
    if pattern == "radial":
        idx = _radial_indices(image_shape, n_keep, rng)
    elif pattern == "uniform":
        perm = rng.permutation(d)
        rest = perm[perm != 0][: n_keep - 1]
        idx = np.concatenate(([0], rest)).astype(np.intp)
    else:
        raise ValueError(f"unknown mask pattern {pattern!r}")

    def apply(x):
        img = np.asarray(x, dtype=float).reshape(image_shape)
        coef = np.fft.fft2(img, norm="ortho").ravel()[idx]
        return np.concatenate([coef.real, coef.imag])

    def apply_adjoint(y):
        y = np.asarray(y, dtype=float)
        w = y[:n_keep] + 1j * y[n_keep:]
        full = np.zeros(d, dtype=complex)
        full[idx] = w
        return np.real(np.fft.ifft2(full.reshape(image_shape), norm="ortho")).ravel()

    return LinearOperator(
        apply=apply,
        apply_adjoint=apply_adjoint,
        operator_norm_sq=1.0,
        in_dim=d,
        out_dim=2 * n_keep,
        name=f"fourier_mask_{pattern}",
    )


def spectral_norm_sq(matrix: np.ndarray, tol: float = 1e-8, max_iter: int = 10000) -> float:
    """Largest squared singular value by power iteration on A^T A."""
    a = np.asarray(matrix, dtype=float)
    gram = a.T @ a
    rng = np.random.Generator(np.random.Philox(0))
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iter):
        w = gram @ v
        lam = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(lam - prev) <= tol * max(abs(lam), 1e-300):
            break
        prev = lam
    return float(v @ (gram @ v))


def make_mixing(endmember_matrix: np.ndarray, n_pixels: int) -> LinearOperator:
    """Linear mixing: abundances (k maps) -> observations (m bands) per pixel."""
    a = np.asarray(endmember_matrix, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("endmember matrix must be a non-empty 2-D array")
    m, k = a.shape

    def apply(x):
        return (a @ np.asarray(x, dtype=float).reshape(k, n_pixels)).ravel()

    def apply_adjoint(y):
        return (a.T @ np.asarray(y, dtype=float).reshape(m, n_pixels)).ravel()

    return LinearOperator(
        apply=apply,
        apply_adjoint=apply_adjoint,
        operator_norm_sq=spectral_norm_sq(a),
        in_dim=k * n_pixels,
        out_dim=m * n_pixels,
        name="mixing",
    )


def load_endmembers_csv(path) -> np.ndarray:
    """Endmember matrix from CSV: rows are spectral bands, columns endmembers."""
    matrix = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if matrix.size == 0:
        raise ValueError(f"empty endmember file: {path}")
    return matrix
