"""Command-line driver.

Subcommands: ``sample <config>``, ``analyze <manifest>``, ``w2curves
<config>``, ``stability --s ... --resolution ...``, ``presets``.  A config
argument is a JSON file path or a preset name.  Relative output directories
are resolved under $PROXMCMC_OUTPUT_ROOT when it is set.

Exit codes: 0 success, 1 validation error, 2 runtime error.

Noise levels for the imaging experiments may be given either directly
(``model.sigma``) or as a blurred signal-to-noise ratio in decibels
(``model.snr_db``), converted as sigma^2 = mean(clean^2) / 10^(snr/10)
where ``clean`` is the noiseless observation.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    load_config,
    run_analyze,
    run_sample,
    run_stability,
    run_w2curves,
)
from .models import ChainDivergenceError
from .presets import preset_names
from .samplers import StepSizeError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _resolve_outdir(arg_output: str | None, config: dict | None,
                    default: str) -> Path:
    out = arg_output or (config or {}).get("output_dir") or default
    out = Path(out)
    root = os.environ.get("PROXMCMC_OUTPUT_ROOT")
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxmcmc",
        description="Proximal Langevin sampling with stabilised kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="run the sampler blocks of a config")
    p_sample.add_argument("config", help="JSON config path or preset name")
    p_sample.add_argument("--output", help="output directory")

    p_analyze = sub.add_parser("analyze", help="analyse the traces of a manifest")
    p_analyze.add_argument("manifest", help="manifest.json written by 'sample'")

    p_w2 = sub.add_parser("w2curves", help="closed-form gradient-budget curves")
    p_w2.add_argument("config", help="JSON config path or preset name")
    p_w2.add_argument("--output", help="output directory")

    p_stab = sub.add_parser("stability", help="mean-square stability regions")
    p_stab.add_argument("--s", type=int, default=10, help="stage count")
    p_stab.add_argument("--eta", type=float, default=0.05, help="damping")
    p_stab.add_argument("--pmin", type=float, default=-200.0)
    p_stab.add_argument("--pmax", type=float, default=0.0)
    p_stab.add_argument("--q2max", type=float, default=60.0)
    p_stab.add_argument("--resolution", type=int, default=200)
    p_stab.add_argument("--output", help="output directory")

    sub.add_parser("presets", help="list available presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return EXIT_OK
        if args.command == "sample":
            config = load_config(args.config)
            outdir = _resolve_outdir(args.output, config,
                                     f"runs/{config['experiment']}")
            manifest = run_sample(config, outdir)
            print(manifest)
            return EXIT_OK
        if args.command == "analyze":
            manifest = run_analyze(args.manifest)
            print(manifest)
            return EXIT_OK
        if args.command == "w2curves":
            config = load_config(args.config)
            outdir = _resolve_outdir(args.output, config, "runs/w2curves")
            manifest = run_w2curves(config, outdir)
            print(manifest)
            return EXIT_OK
        if args.command == "stability":
            outdir = _resolve_outdir(args.output, None, "runs/stability")
            manifest = run_stability(args.s, args.eta, args.pmin, args.pmax,
                                     args.q2max, args.resolution, outdir)
            print(manifest)
            return EXIT_OK
    except (ConfigError, StepSizeError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except ChainDivergenceError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, RuntimeError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
