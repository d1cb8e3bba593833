"""Named experiment configurations.

Model hyperparameters follow the published experiment settings; iteration
counts are desk-scale (small enough for a laptop) and always give every
sampler block in a preset the same gradient-evaluation budget, which the
cross-method analysis requires.
"""

from __future__ import annotations

import copy

# 1-D targets: 10^6-gradient budget, divisible by both stage counts.
_ONED_BLOCKS = [
    {"kernel": "MYULA", "delta": 1.0e-5, "n_iterations": 999_990,
     "burn_in": 0, "thinning": 1},
    {"kernel": "SKROCK", "stages": 10, "delta": 1.7e-3, "n_iterations": 99_999,
     "burn_in": 0, "thinning": 1},
    {"kernel": "SKROCK", "stages": 15, "delta": 4.0e-3, "n_iterations": 66_666,
     "burn_in": 0, "thinning": 1},
]

PRESETS: dict[str, dict] = {
    "laplace_table1": {
        "experiment": "laplace1d",
        "seed": 20200517,
        "model": {"scale": 1.0, "lambda": 1.0e-5},
        "diagnostics": {"kl_bins": 100, "kl_support": [-9.0, 9.0]},
        "samplers": _ONED_BLOCKS,
    },
    "uniform_table2": {
        "experiment": "uniform1d",
        "seed": 20200518,
        "model": {"lambda": 1.0e-5},
        "diagnostics": {"kl_bins": 100, "kl_support": [-1.05, 1.05]},
        "samplers": _ONED_BLOCKS,
    },
    "gaussian_fig1": {
        "experiment": "gaussian2d",
        "seed": 20200519,
        "model": {"variances": [1.0, 1.0e-2]},
        "samplers": [
            {"kernel": "MYULA", "delta": 1.98e-2, "n_iterations": 10_000,
             "burn_in": 0, "thinning": 1},
            # The stage count follows the optimal-stage rule for kappa = 100;
            # the step sits at the conservative s = 2 bound.
            {"kernel": "SKROCK", "stages": 2, "delta": "auto",
             "n_iterations": 5_000, "burn_in": 0, "thinning": 1},
        ],
    },
    "cameraman_sec42": {
        "experiment": "deconvolution",
        "seed": 20200520,
        "model": {"sigma": 0.47, "beta": 0.047, "lambda": None,
                  "image": "synthetic:blocks", "kernel_size": 5,
                  "intensity_scale": 255.0},
        "scale": {"image_shape": [64, 64]},
        "samplers": [
            {"kernel": "MYULA", "delta": 0.106, "n_iterations": 99_990,
             "burn_in": 14_985, "thinning": 15, "store_trace_statistic": True},
            {"kernel": "SKROCK", "stages": 10, "delta": 14.65,
             "n_iterations": 9_999, "burn_in": 1_499, "thinning": 1,
             "store_trace_statistic": True},
            {"kernel": "SKROCK", "stages": 15, "delta": 34.30,
             "n_iterations": 6_666, "burn_in": 999, "thinning": 1,
             "store_trace_statistic": True},
        ],
    },
    "unmixing_sec43": {
        "experiment": "unmixing",
        "seed": 20200521,
        "model": {"sigma": 8.4e-4, "alpha": 25.0, "beta": 185.0,
                  "lambda": None, "endmembers": "synthetic"},
        "scale": {"map_shape": [16, 16], "n_endmembers": 3, "n_bands": 8},
        "samplers": [
            {"kernel": "MYULA", "delta": "auto", "n_iterations": 99_990,
             "burn_in": 14_985, "thinning": 15, "store_trace_statistic": True},
            {"kernel": "SKROCK", "stages": 10, "delta": "auto",
             "n_iterations": 9_999, "burn_in": 1_499, "thinning": 1,
             "store_trace_statistic": True},
            {"kernel": "SKROCK", "stages": 15, "delta": "auto",
             "n_iterations": 6_666, "burn_in": 999, "thinning": 1,
             "store_trace_statistic": True},
        ],
    },
    "tomography_sec44": {
        "experiment": "tomography",
        "seed": 20200522,
        "model": {"sigma": 1.0e-2, "beta": 1.0e2, "lambda": 0.2e-4,
                  "keep_fraction": 0.15, "mask_pattern": "radial",
                  "image": "synthetic:shepp_logan"},
        "scale": {"image_shape": [32, 32]},
        "samplers": [
            {"kernel": "MYULA", "delta": 1.67e-5, "n_iterations": 99_990,
             "burn_in": 9_990, "thinning": 10, "store_trace_statistic": True},
            {"kernel": "SKROCK", "stages": 5, "delta": 5.02e-4,
             "n_iterations": 19_998, "burn_in": 1_998, "thinning": 1,
             "store_trace_statistic": True},
            {"kernel": "SKROCK", "stages": 10, "delta": 2.30e-3,
             "n_iterations": 9_999, "burn_in": 999, "thinning": 1,
             "store_trace_statistic": True},
        ],
    },
    "w2curves_fig3": {
        "experiment": "w2curves",
        "seed": 0,
        "kappas": [1.0e2, 1.0e3, 1.0e4],
        "epsilon_sq": [1.0e-1, 1.0e-3],
        "dimension": 100,
        "x0": 1.0,
        "eta": 0.05,
    },
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return copy.deepcopy(PRESETS[name])
