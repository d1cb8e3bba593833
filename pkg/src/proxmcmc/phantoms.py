"""Synthetic ground-truth scenes for the desk-scale experiments."""

from __future__ import annotations

import numpy as np

# Classic head-phantom ellipses (modified intensities for contrast):
# (value, semi-axis a, semi-axis b, centre x, centre y, rotation in degrees).
_ELLIPSES = [
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
]


def shepp_logan(shape: tuple[int, int]) -> np.ndarray:
    """Head phantom on a [-1, 1]^2 grid, clipped to [0, 1]."""
    rows, cols = shape
    y = np.linspace(-1.0, 1.0, rows)[:, None]
    x = np.linspace(-1.0, 1.0, cols)[None, :]
    img = np.zeros(shape)
    for value, a, b, cx, cy, deg in _ELLIPSES:
        phi = np.deg2rad(deg)
        xr = (x - cx) * np.cos(phi) + (y - cy) * np.sin(phi)
        yr = -(x - cx) * np.sin(phi) + (y - cy) * np.cos(phi)
        img += value * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return np.clip(img, 0.0, 1.0)


def blocks_scene(shape: tuple[int, int]) -> np.ndarray:
    """Piecewise-constant cartoon scene in [0, 1], well matched to a TV prior."""
    rows, cols = shape
    img = np.full(shape, 0.15)
    r = np.arange(rows)[:, None] / rows
    c = np.arange(cols)[None, :] / cols
    img[(r > 0.10) & (r < 0.45) & (c > 0.12) & (c < 0.40)] = 0.85
    img[((r - 0.65) ** 2 + (c - 0.30) ** 2) < 0.03] = 0.55
    img[(r > 0.25) & (r < 0.85) & (c > 0.60) & (c < 0.72)] = 0.95
    img[(r > 0.55) & (r < 0.65) & (c > 0.45) & (c < 0.92)] = 0.35
    img[((r - 0.2) ** 2 + (c - 0.8) ** 2) < 0.008] = 0.05
    return img


def abundance_maps(map_shape: tuple[int, int], k: int, seed: int) -> np.ndarray:
    """Sparse nonnegative abundance maps (k, rows, cols) with smooth bumps."""
    rows, cols = map_shape
    rng = np.random.Generator(np.random.Philox(seed))
    r = np.arange(rows)[:, None] / max(rows - 1, 1)
    c = np.arange(cols)[None, :] / max(cols - 1, 1)
    maps = np.zeros((k, rows, cols))
    for i in range(k):
        for _ in range(2 + int(rng.integers(0, 2))):
            cr, cc = rng.uniform(0.1, 0.9, size=2)
            width = rng.uniform(0.05, 0.2)
            height = rng.uniform(0.4, 1.0)
            bump = height * np.exp(-((r - cr) ** 2 + (c - cc) ** 2) / (2 * width**2))
            maps[i] += bump
        # Truncate the skirts so the maps are genuinely sparse.
        maps[i] = np.maximum(maps[i] - 0.1, 0.0)
    peak = maps.max()
    if peak > 0:
        maps /= peak
    return maps


def endmember_spectra(n_bands: int, k: int, seed: int,
                      condition: float = 600.0) -> np.ndarray:
    """Positive smooth spectra, one column per material (n_bands x k).

    Real spectral libraries are nearly collinear, which is what makes
    unmixing hard; the construction adds seeded bumps to a shared baseline
    and then pins the singular spectrum so the Gram condition number equals
    ``condition`` regardless of the seed.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    grid = np.linspace(0.0, 1.0, n_bands)[:, None]
    base = 0.4 + np.exp(-((grid - 0.5) ** 2) / (2 * 0.35**2))
    centres = rng.uniform(0.15, 0.85, size=k)[None, :]
    widths = rng.uniform(0.06, 0.15, size=k)[None, :]
    amps = rng.uniform(0.5, 1.0, size=k)[None, :]
    spectra = base + 0.3 * amps * np.exp(-((grid - centres) ** 2) / (2 * widths**2))
    u, s, vt = np.linalg.svd(spectra, full_matrices=False)
    s = s[0] * np.geomspace(1.0, 1.0 / np.sqrt(condition), s.size)
    return u @ np.diag(s) @ vt
