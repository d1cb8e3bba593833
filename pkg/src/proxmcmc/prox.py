"""Proximal maps, penalty values, and Moreau-Yosida envelopes.

All maps act on flat float64 vectors; image-shaped penalties carry their
shape and reshape internally, so chain states stay one-dimensional.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class ProxOperator:
    """A penalty together with its proximal map.

    ``evaluate(x, lam)`` returns argmin_u  penalty(u) + ||x - u||^2 / (2 lam),
    ``penalty_value(x)`` the (extended-real) penalty itself.
    """

    evaluate: Callable[[np.ndarray, float], np.ndarray]
    penalty_value: Callable[[np.ndarray], float]
    name: str = ""


def soft_threshold(x: np.ndarray, tau: float) -> np.ndarray:
    """Componentwise sign(x) * max(|x| - tau, 0)."""
    if tau < 0:
        raise ValueError("threshold must be >= 0")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def project_box(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Componentwise clamp to [lo, hi]; hi may be +inf."""
    if lo > hi:
        raise ValueError("lower bound exceeds upper bound")
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def image_gradient(u: np.ndarray):
    """Forward-difference gradient with replicate (Neumann) boundary.

    Returns (vertical, horizontal) difference fields; the last row/column
    of each field is zero.
    """
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:-1, :] = u[1:, :] - u[:-1, :]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    return gx, gy


def image_divergence(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Discrete divergence, the negative adjoint of ``image_gradient``."""
    div = np.zeros_like(px)
    div[0, :] += px[0, :]
    div[1:-1, :] += px[1:-1, :] - px[:-2, :]
    div[-1, :] += -px[-2, :]
    div[:, 0] += py[:, 0]
    div[:, 1:-1] += py[:, 1:-1] - py[:, :-2]
    div[:, -1] += -py[:, -2]
    return div


def tv_value(image: np.ndarray) -> float:
    """Isotropic discrete total variation with Neumann boundary."""
    image = np.asarray(image, dtype=float)
    if not np.all(np.isfinite(image)):
        raise ValueError("total variation of non-finite image")
    gx, gy = image_gradient(image)
    return float(np.hypot(gx, gy).sum())


def _chambolle_stack(images: np.ndarray, tau: float, tol: float,
                     max_iter: int) -> np.ndarray:
    """Dual-projection TV prox on a (maps, rows, cols) stack.

    One fixed point with the standard step 1/8, stopping once the largest
    dual update across the whole stack drops below ``tol``.  Sharing the
    sweep across maps keeps the per-iteration interpreter overhead constant
    in the number of maps (hot path of the imaging samplers).
    """
    px = np.zeros_like(images)
    py = np.zeros_like(images)
    f_scaled = images / tau
    step = 0.125
    v = np.empty_like(images)
    gx = np.zeros_like(images)
    gy = np.zeros_like(images)
    for _ in range(max_iter):
        # v = div(p) - images / tau
        v[..., 0, :] = px[..., 0, :]
        np.subtract(px[..., 1:-1, :], px[..., :-2, :], out=v[..., 1:-1, :])
        v[..., -1, :] = -px[..., -2, :]
        v[..., :, 0] += py[..., :, 0]
        v[..., :, 1:-1] += py[..., :, 1:-1]
        v[..., :, 1:-1] -= py[..., :, :-2]
        v[..., :, -1] -= py[..., :, -2]
        v -= f_scaled
        # p <- (p + step grad v) / (1 + step |grad v|)
        np.subtract(v[..., 1:, :], v[..., :-1, :], out=gx[..., :-1, :])
        np.subtract(v[..., :, 1:], v[..., :, :-1], out=gy[..., :, :-1])
        gx *= step
        gy *= step
        denom = np.sqrt(gx * gx + gy * gy)
        denom += 1.0
        px_new = px + gx
        px_new /= denom
        py_new = py + gy
        py_new /= denom
        delta = max(np.abs(px_new - px).max(), np.abs(py_new - py).max())
        px, py = px_new, py_new
        if delta < tol:
            break
    div = np.empty_like(images)
    div[..., 0, :] = px[..., 0, :]
    div[..., 1:-1, :] = px[..., 1:-1, :] - px[..., :-2, :]
    div[..., -1, :] = -px[..., -2, :]
    div[..., :, 0] += py[..., :, 0]
    div[..., :, 1:-1] += py[..., :, 1:-1] - py[..., :, :-2]
    div[..., :, -1] -= py[..., :, -2]
    return images - tau * div


def prox_tv(image: np.ndarray, tau: float, tol: float = 1e-4, max_iter: int = 100) -> np.ndarray:
    """Approximate prox of tau * TV at ``image`` by dual projection.

    Iterates Chambolle's fixed point on the dual field with the standard
    step 1/8 (guaranteed convergent for the 2-D discrete gradient), stopping
    once the largest dual update drops below ``tol`` or after ``max_iter``
    sweeps.  The dual variables are bounded by 1, so the tolerance is
    effectively relative.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("expected a 2-D image")
    if min(image.shape) < 2:
        raise ValueError("TV prox needs at least 2 pixels per dimension")
    if not np.all(np.isfinite(image)):
        raise ValueError("non-finite input image")
    if tau < 0:
        raise ValueError("weight must be >= 0")
    if tau == 0.0:
        return image.copy()
    return _chambolle_stack(image[None], tau, tol, max_iter)[0]


def zero_prox() -> ProxOperator:
    """The zero penalty; its prox is the identity."""
    return ProxOperator(
        evaluate=lambda x, lam: np.asarray(x, dtype=float).copy(),
        penalty_value=lambda x: 0.0,
        name="zero",
    )


def l1_prox(weight: float = 1.0) -> ProxOperator:
    """Penalty weight * ||x||_1 with soft-threshold prox."""
    if weight < 0:
        raise ValueError("weight must be >= 0")
    return ProxOperator(
        evaluate=lambda x, lam: soft_threshold(x, lam * weight),
        penalty_value=lambda x: float(weight * np.abs(x).sum()),
        name="l1",
    )


def box_indicator_prox(lo: float, hi: float) -> ProxOperator:
    """Indicator of the box [lo, hi]^d; the prox is the projection."""

    def penalty(x):
        x = np.asarray(x, dtype=float)
        inside = np.all(x >= lo) and np.all(x <= hi)
        return 0.0 if inside else float("inf")

    return ProxOperator(
        evaluate=lambda x, lam: project_box(x, lo, hi),
        penalty_value=penalty,
        name="box",
    )


def tv_prox(weight: float, map_shape: tuple[int, int], n_maps: int = 1,
            tol: float = 1e-4, max_iter: int = 100) -> ProxOperator:
    """Penalty weight * sum of per-map TV, prox'd map by map.

    ``map_shape`` is the (rows, cols) of one map; a flat input of length
    n_maps * rows * cols is interpreted as stacked maps.
    """
    if weight < 0:
        raise ValueError("weight must be >= 0")
    rows, cols = map_shape

    def evaluate(x, lam):
        maps = np.asarray(x, dtype=float).reshape(n_maps, rows, cols)
        if not np.all(np.isfinite(maps)):
            raise ValueError("non-finite input image")
        if lam * weight == 0.0:
            return maps.ravel().copy()
        return _chambolle_stack(maps, lam * weight, tol, max_iter).ravel()

    def penalty(x):
        maps = np.asarray(x, dtype=float).reshape(n_maps, rows, cols)
        return float(weight * sum(tv_value(m) for m in maps))

    return ProxOperator(evaluate=evaluate, penalty_value=penalty, name="tv")


def composite_prox(parts: Sequence[ProxOperator]) -> ProxOperator:
    """Sequential composition of proximal maps, penalties summed.

    The true prox of a sum has no closed form in general; applying the
    individual proxes in the given order is the documented approximation
    used for composite priors.
    """
    parts = tuple(parts)
    if not parts:
        raise ValueError("need at least one operator")

    def evaluate(x, lam):
        out = np.asarray(x, dtype=float)
        for op in parts:
            out = op.evaluate(out, lam)
        return out

    def penalty(x):
        return float(sum(op.penalty_value(x) for op in parts))

    return ProxOperator(
        evaluate=evaluate,
        penalty_value=penalty,
        name="+".join(op.name for op in parts),
    )


@dataclass(frozen=True)
class MoreauEnvelope:
    """Moreau-Yosida envelope of a penalty at smoothing parameter lam.

    The envelope lower-bounds the penalty and has a (1/lam)-Lipschitz
    gradient (x - prox(x)) / lam.
    """

    base: ProxOperator
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("smoothing parameter must be > 0")

    def prox(self, x: np.ndarray) -> np.ndarray:
        return self.base.evaluate(np.asarray(x, dtype=float), self.lam)

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        p = self.prox(x)
        return float(self.base.penalty_value(p) + np.sum((x - p) ** 2) / (2.0 * self.lam))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.prox(x)) / self.lam


def my_envelope_gradient(envelope: MoreauEnvelope, x: np.ndarray) -> np.ndarray:
    """Gradient of the envelope, (x - prox(x)) / lam."""
    return envelope.gradient(x)
