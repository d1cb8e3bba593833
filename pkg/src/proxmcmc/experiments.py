"""Experiment drivers: config validation, data generation, sampling runs,
post-hoc analysis, budget curves, and stability rasters.

Everything is deterministic given the config's master seed: the data seed
and one seed per sampler block are derived from it by index, so re-running
a config reproduces the output tree byte for byte (wall times excepted).
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import storage
from .analysis import (
    UnreachableAccuracyError,
    gradient_budget_curve,
    ms_stability_region,
    stability_em,
    stability_skrock,
)
from .diagnostics import DiagnosticsReport, build_report, speedup_report
from .models import (
    GaussianTarget,
    PosteriorModel,
    model_deconvolution,
    model_gaussian,
    model_laplace_1d,
    model_tomography,
    model_uniform_1d,
    model_unmixing,
)
from .operators import load_endmembers_csv, make_blur, make_fourier_mask, make_mixing
from .phantoms import abundance_maps, blocks_scene, endmember_spectra, shepp_logan
from .presets import get_preset
from .samplers import (
    KERNEL_MYULA,
    KERNEL_SKROCK,
    SamplerConfig,
    StepSizeError,
    max_stepsize,
    run_chain,
    validate_stepsize,
)


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


SAMPLING_EXPERIMENTS = ("gaussian2d", "laplace1d", "uniform1d",
                        "deconvolution", "unmixing", "tomography")

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "seed"],
    "properties": {
        "experiment": {"enum": list(SAMPLING_EXPERIMENTS) + ["w2curves", "stability"]},
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
        "model": {"type": "object"},
        "scale": {"type": "object"},
        "diagnostics": {"type": "object"},
        "samplers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kernel", "n_iterations"],
                "properties": {
                    "kernel": {"enum": [KERNEL_MYULA, KERNEL_SKROCK]},
                    "delta": {"anyOf": [{"type": "number", "exclusiveMinimum": 0},
                                        {"const": "auto"}]},
                    "stages": {"type": "integer", "minimum": 1},
                    "eta": {"type": "number", "minimum": 0},
                    "n_iterations": {"type": "integer", "minimum": 0},
                    "burn_in": {"type": "integer", "minimum": 0},
                    "thinning": {"type": "integer", "minimum": 1},
                    "store_trace_statistic": {"type": "boolean"},
                    "label": {"type": "string"},
                },
            },
        },
        "kappas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "epsilon_sq": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "dimension": {"type": "integer", "minimum": 1},
        "x0": {"type": "number"},
        "eta": {"type": "number", "minimum": 0},
    },
}


def validate_config(config: dict) -> None:
    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(config),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field '{path}': {err.message}")
    if config["experiment"] in SAMPLING_EXPERIMENTS and "samplers" not in config:
        raise ConfigError("config field 'samplers': required for sampling experiments")


def load_config(source) -> dict:
    """Config from a JSON file path or a preset name."""
    path = Path(str(source))
    if path.suffix == ".json" or path.exists():
        try:
            config = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {source}")
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}")
    else:
        try:
            config = get_preset(str(source))
        except KeyError as err:
            raise ConfigError(str(err))
    validate_config(config)
    return config


def derive_seed(master: int, index: int) -> int:
    """Deterministic per-purpose seed; index 0 is data, 1 + i is block i."""
    seq = np.random.SeedSequence(entropy=master, spawn_key=(index,))
    return int(seq.generate_state(1, np.uint64)[0])


@dataclasses.dataclass
class ExperimentSetup:
    """A built model plus everything analysis needs to interpret its chains."""

    model: PosteriorModel
    x0: np.ndarray
    init_mode: str
    truth: np.ndarray | None = None
    target_density: object = None
    kl_support: tuple[float, float] | None = None
    notes: dict = dataclasses.field(default_factory=dict)


def _sigma_from_snr(clean: np.ndarray, snr_db: float) -> float:
    # Blurred SNR in dB: snr = 10 log10(mean(clean^2) / sigma^2).
    return float(np.sqrt(np.mean(clean**2) / 10.0 ** (snr_db / 10.0)))


def _resolve_sigma(model_cfg: dict, clean: np.ndarray) -> float:
    sigma = model_cfg.get("sigma")
    if sigma is None:
        snr = model_cfg.get("snr_db")
        if snr is None:
            raise ConfigError("config field 'model.sigma': give sigma or snr_db")
        sigma = _sigma_from_snr(clean, snr)
    if sigma <= 0:
        raise ConfigError("config field 'model.sigma': must be > 0")
    return float(sigma)


def _load_scene(spec: str, shape) -> np.ndarray:
    if spec == "synthetic:blocks":
        return blocks_scene(tuple(shape))
    if spec == "synthetic:shepp_logan":
        return shepp_logan(tuple(shape))
    img = storage.load_image(spec)
    if list(img.shape) != list(shape):
        raise ConfigError(
            f"config field 'model.image': image shape {img.shape} != {tuple(shape)}")
    return img


def build_experiment(config: dict) -> ExperimentSetup:
    """Build the model, ground truth, and initial state for a config."""
    experiment = config["experiment"]
    model_cfg = dict(config.get("model", {}))
    scale_cfg = dict(config.get("scale", {}))
    data_seed = derive_seed(config["seed"], 0)
    rng = np.random.Generator(np.random.Philox(data_seed))

    if experiment == "gaussian2d":
        variances = model_cfg.get("variances", [1.0, 1.0e-2])
        model = model_gaussian(variances)
        return ExperimentSetup(model=model, x0=np.zeros(model.dimension),
                               init_mode="zero")

    if experiment == "laplace1d":
        scale = float(model_cfg.get("scale", 1.0))
        lam = float(model_cfg.get("lambda") or 1.0e-5)
        model = model_laplace_1d(scale=scale, lam=lam)

        # The smoothed target: the envelope of |x|/scale is a Huber function,
        # quadratic inside |x| <= lam/scale and affine outside.
        def laplace_regularised_density(x):
            absx = np.abs(np.asarray(x, dtype=float))
            knee = lam / scale
            env = np.where(absx <= knee,
                           absx**2 / (2.0 * lam),
                           absx / scale - lam / (2.0 * scale**2))
            return np.exp(-env)

        return ExperimentSetup(model=model, x0=np.zeros(1), init_mode="zero",
                               target_density=laplace_regularised_density,
                               kl_support=(-9.0 * scale, 9.0 * scale))

    if experiment == "uniform1d":
        lam = float(model_cfg.get("lambda") or 1.0e-5)
        model = model_uniform_1d(lam=lam)

        def uniform_regularised_density(x):
            x = np.asarray(x, dtype=float)
            excess = np.maximum(np.abs(x) - 1.0, 0.0)
            return np.exp(-(excess**2) / (2.0 * lam))

        return ExperimentSetup(model=model, x0=np.zeros(1), init_mode="zero",
                               target_density=uniform_regularised_density,
                               kl_support=(-1.05, 1.05))

    if experiment == "deconvolution":
        shape = tuple(scale_cfg.get("image_shape", [64, 64]))
        intensity = float(model_cfg.get("intensity_scale", 255.0))
        truth = _load_scene(model_cfg.get("image", "synthetic:blocks"), shape) * intensity
        ksize = int(model_cfg.get("kernel_size", 5))
        kernel = np.full((ksize, ksize), 1.0 / ksize**2)
        blur = make_blur(kernel, shape)
        clean = blur.apply(truth.ravel())
        sigma = _resolve_sigma(model_cfg, clean)
        y = (clean + sigma * rng.standard_normal(clean.size)).reshape(shape)
        model = model_deconvolution(y, blur, sigma=sigma,
                                    beta=float(model_cfg["beta"]),
                                    lam=model_cfg.get("lambda"))
        x0 = blur.apply_adjoint(y.ravel())
        return ExperimentSetup(model=model, x0=x0, init_mode="adjoint",
                               truth=truth.ravel(),
                               notes={"sigma": sigma, "image_shape": list(shape)})

    if experiment == "unmixing":
        map_shape = tuple(scale_cfg.get("map_shape", [16, 16]))
        k = int(scale_cfg.get("n_endmembers", 3))
        n_bands = int(scale_cfg.get("n_bands", 8))
        n_pixels = map_shape[0] * map_shape[1]
        spec = model_cfg.get("endmembers", "synthetic")
        if spec == "synthetic":
            endmembers = endmember_spectra(n_bands, k, derive_seed(config["seed"], 0))
        else:
            endmembers = load_endmembers_csv(spec)
            n_bands, k = endmembers.shape
        mixing = make_mixing(endmembers, n_pixels)
        truth = abundance_maps(map_shape, k, derive_seed(config["seed"], 0)).ravel()
        clean = mixing.apply(truth)
        sigma = _resolve_sigma(model_cfg, clean)
        y = clean + sigma * rng.standard_normal(clean.size)
        model = model_unmixing(y, mixing, sigma=sigma,
                               alpha=float(model_cfg["alpha"]),
                               beta=float(model_cfg["beta"]),
                               map_shape=map_shape,
                               lam=model_cfg.get("lambda"))
        x0 = np.maximum(mixing.apply_adjoint(y) / mixing.operator_norm_sq, 0.0)
        return ExperimentSetup(model=model, x0=x0, init_mode="adjoint",
                               truth=truth,
                               notes={"sigma": sigma, "n_endmembers": k,
                                      "n_bands": n_bands})

    if experiment == "tomography":
        shape = tuple(scale_cfg.get("image_shape", [32, 32]))
        truth = _load_scene(model_cfg.get("image", "synthetic:shepp_logan"), shape)
        mask = make_fourier_mask(shape, float(model_cfg.get("keep_fraction", 0.15)),
                                 seed=derive_seed(config["seed"], 0),
                                 pattern=model_cfg.get("mask_pattern", "radial"))
        clean = mask.apply(truth.ravel())
        sigma = _resolve_sigma(model_cfg, clean)
        y = clean + sigma * rng.standard_normal(clean.size)
        model = model_tomography(y, mask, sigma=sigma,
                                 beta=float(model_cfg["beta"]),
                                 image_shape=shape,
                                 lam=model_cfg.get("lambda"))
        x0 = mask.apply_adjoint(y)
        return ExperimentSetup(model=model, x0=x0, init_mode="adjoint",
                               truth=truth.ravel(),
                               notes={"sigma": sigma,
                                      "kept_coefficients": mask.out_dim // 2})

    raise ConfigError(f"config field 'experiment': {experiment!r} is not a "
                      "sampling experiment")


def block_label(block: dict) -> str:
    if "label" in block:
        return block["label"]
    if block["kernel"] == KERNEL_MYULA:
        return "myula_1"
    return f"skrock_{block.get('stages', 1)}"


def resolve_block(block: dict, model: PosteriorModel, seed: int) -> SamplerConfig:
    """Turn a config block into a SamplerConfig, resolving 'auto' steps.

    Auto steps: 1/L for the Euler kernel, 0.95 of the stability bound for
    the stabilised kernel (a step close to the maximum is recommended).
    """
    kernel = block["kernel"]
    stages = int(block.get("stages", 1))
    eta = float(block.get("eta", 0.05))
    delta = block.get("delta", "auto")
    if delta == "auto":
        bound = max_stepsize(model, kernel, stages, eta)
        delta = 0.5 * bound if kernel == KERNEL_MYULA else 0.95 * bound
    return SamplerConfig(
        kernel=kernel,
        delta=float(delta),
        n_iterations=int(block["n_iterations"]),
        stages=stages,
        eta=eta,
        seed=seed,
        burn_in=int(block.get("burn_in", 0)),
        thinning=int(block.get("thinning", 1)),
        store_trace_statistic=bool(block.get("store_trace_statistic", False)),
    )


def run_sample(config: dict, outdir) -> Path:
    """Run every sampler block of a config and write traces plus a manifest."""
    experiment = config["experiment"]
    if experiment not in SAMPLING_EXPERIMENTS:
        raise ConfigError(f"config field 'experiment': 'sample' cannot run "
                          f"{experiment!r}")
    setup = build_experiment(config)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    # Validate every block before any sampling starts.
    resolved_blocks = []
    for i, block in enumerate(config["samplers"]):
        cfg = resolve_block(block, setup.model, derive_seed(config["seed"], 1 + i))
        try:
            validate_stepsize(setup.model, cfg)
        except StepSizeError as err:
            raise ConfigError(f"config field 'samplers[{i}].delta': {err}")
        resolved_blocks.append((block_label(block), cfg))

    files: dict[str, dict] = {}
    wall_times: dict[str, float] = {}
    for label, cfg in resolved_blocks:
        trace = run_chain(setup.model, cfg, setup.x0)
        stem = f"{experiment}_{label}"
        for kind, name in storage.save_trace(outdir, stem, trace).items():
            files[name] = {"kind": kind, "block": label}
        wall_times[label] = trace.wall_time

    resolved_config = dict(config)
    resolved_config["samplers"] = [
        dict(dataclasses.asdict(cfg), label=label) for label, cfg in resolved_blocks]
    resolved_config["init_mode"] = setup.init_mode
    resolved_config.setdefault("notes", {}).update(setup.notes)

    for name, meta in files.items():
        path = outdir / name
        meta["sha256"] = storage.file_sha256(path)
        meta["bytes"] = path.stat().st_size

    manifest = {
        "command": "sample",
        "config": resolved_config,
        "files": files,
        "wall_times": wall_times,
    }
    return storage.write_json(outdir / "manifest.json", manifest)


def _report_for_trace(trace_samples, header, setup, diag_cfg, label) -> DiagnosticsReport:
    cfg = header
    budget_per_sample = cfg["config"]["thinning"] * (
        cfg["config"]["stages"] if cfg["config"]["kernel"] == KERNEL_SKROCK else 1)
    return build_report(
        trace_samples,
        gradient_evals=cfg["gradient_evals"],
        max_lag=int(diag_cfg.get("max_lag", 200)),
        target_density=setup.target_density,
        kl_bins=int(diag_cfg.get("kl_bins", 100)),
        kl_support=tuple(diag_cfg["kl_support"]) if "kl_support" in diag_cfg
        else setup.kl_support,
        truth=setup.truth,
        budget_per_sample=budget_per_sample,
        label=label,
    )


def run_analyze(manifest_path) -> Path:
    """Analyse every trace in a manifest and emit reports plus the
    cross-method comparison table."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    config = manifest["config"]
    outdir = manifest_path.parent
    experiment = config["experiment"]
    diag_cfg = dict(config.get("diagnostics", {}))
    setup = build_experiment(config)

    headers = [name for name, meta in sorted(manifest["files"].items())
               if meta["kind"] == "header"]
    blocks = []
    for name in headers:
        header = json.loads((outdir / name).read_text())
        trace = storage.load_trace(outdir / name)
        label = manifest["files"][name]["block"]
        blocks.append((label, header, trace))
    # Keep the config's block order: the first block is the reference method.
    order = {block_label(b): i for i, b in enumerate(config["samplers"])}
    blocks.sort(key=lambda item: order.get(item[0], len(order)))

    written: list[Path] = []
    reports: dict[str, DiagnosticsReport] = {}
    for label, header, trace in blocks:
        if trace.samples.shape[0] == 0:
            continue
        report = _report_for_trace(trace.samples, header, setup, diag_cfg, label)
        reports[label] = report
        stem = f"{experiment}_{label}"
        payload = {
            "label": label,
            "kernel": header["config"]["kernel"],
            "stages": header["config"]["stages"],
            "stepsize": header["config"]["delta"],
            "n_samples": report.n_samples,
            "gradient_evals": report.gradient_evals,
            "ess": {k: float(v.ess) for k, v in report.components.items()},
            "supereffective": {k: bool(v.supereffective)
                               for k, v in report.components.items()},
            "kl_divergence": None if report.kl_divergence is None
            else float(report.kl_divergence),
        }
        if report.directions:
            payload["directions"] = {k: list(map(float, v))
                                     for k, v in report.directions.items()}
        written.append(storage.write_json(outdir / f"{stem}.report.json", payload))

        comp_names = sorted(report.components)
        acf_rows = zip(*[report.components[c].acf for c in comp_names])
        written.append(storage.write_csv(
            outdir / f"{stem}.acf.csv",
            ["lag"] + [f"acf_{c}" for c in comp_names],
            ((lag, *vals) for lag, vals in enumerate(acf_rows))))
        if report.mse is not None:
            written.append(storage.write_csv(
                outdir / f"{stem}.mse.csv",
                ["gradient_evals", "mse"],
                ((float(b), float(m)) for b, m in report.mse)))

    if reports:
        written.append(_write_comparison(outdir, experiment, config, blocks,
                                         reports, setup, diag_cfg))

    analysis_manifest = {
        "command": "analyze",
        "source_manifest": manifest_path.name,
        "files": {p.name: {"sha256": storage.file_sha256(p), "bytes": p.stat().st_size}
                  for p in written},
    }
    return storage.write_json(outdir / "analysis_manifest.json", analysis_manifest)


def _thinned_reference_report(ref_label, ref_header, ref_trace, candidate_stages,
                              setup, diag_cfg):
    """Reference chain re-analysed after 1-in-s thinning (comparison contract).

    The stored chain may already be thinned; only the remaining factor is
    applied.
    """
    stored_thinning = ref_header["config"]["thinning"]
    factor = max(1, round(candidate_stages / stored_thinning))
    samples = ref_trace.samples[::factor] if factor > 1 else ref_trace.samples
    return build_report(
        samples,
        gradient_evals=ref_header["gradient_evals"],
        max_lag=int(diag_cfg.get("max_lag", 200)),
        label=f"{ref_label}_thin{factor}",
    )


def _write_comparison(outdir, experiment, config, blocks, reports, setup, diag_cfg):
    ref_label, ref_header, ref_trace = blocks[0]
    single = len(reports) == 1
    rows = []
    for label, header, trace in blocks:
        if label not in reports:
            continue
        report = reports[label]
        comps = report.components
        ess_slow = comps["slow"].ess if "slow" in comps else comps["chain"].ess
        ess_fast = comps["fast"].ess if "fast" in comps else comps["chain"].ess
        row = [
            header["config"]["kernel"],
            header["config"]["stages"],
            header["config"]["delta"],
            ess_slow,
            ess_fast,
            report.kl_divergence if report.kl_divergence is not None else "",
        ]
        if not single:
            speed_slow = speed_fast = ""
            if label != ref_label:
                thinned = _thinned_reference_report(
                    ref_label, ref_header, ref_trace,
                    header["config"]["stages"], setup, diag_cfg)
                ratios = speedup_report(thinned, report)
                speed_slow = ratios.get("slow", ratios.get("chain", ""))
                speed_fast = ratios.get("fast", ratios.get("chain", ""))
            row += [speed_slow, speed_fast]
        rows.append(tuple(row))
    header_cols = ["method", "stages", "stepsize", "ess_slow", "ess_fast",
                   "kl_divergence"]
    if not single:
        header_cols += ["speedup_slow", "speedup_fast"]
    return storage.write_csv(outdir / f"{experiment}_comparison.csv",
                             header_cols, rows)


def run_w2curves(config: dict, outdir) -> Path:
    """Gradient-budget curves over condition numbers, plus log-log slopes."""
    if config["experiment"] != "w2curves":
        raise ConfigError("config field 'experiment': expected 'w2curves'")
    kappas = config.get("kappas")
    eps_sq_list = config.get("epsilon_sq")
    if not kappas:
        raise ConfigError("config field 'kappas': required")
    if not eps_sq_list:
        raise ConfigError("config field 'epsilon_sq': required")
    dimension = int(config.get("dimension", 100))
    x0_value = float(config.get("x0", 1.0))
    eta = float(config.get("eta", 0.05))

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    budgets: dict[tuple, int] = {}
    for kappa in kappas:
        # Variances spread uniformly from 1 down to 1/kappa.
        target = GaussianTarget(np.linspace(1.0, 1.0 / kappa, dimension))
        x0 = np.full(dimension, x0_value)
        for eps_sq in eps_sq_list:
            for method in ("EM", "SKROCK"):
                try:
                    g = gradient_budget_curve(target, method, np.sqrt(eps_sq),
                                              x0, eta=eta)
                    rows.append((kappa, method, eps_sq, g, "ok"))
                    budgets[(method, eps_sq, kappa)] = g
                except UnreachableAccuracyError as err:
                    rows.append((kappa, method, eps_sq, "", f"unreachable:"
                                 f" floor {err.floor:.3e} > {err.threshold:.3e}"))

    files = [storage.write_csv(outdir / "w2_budgets.csv",
                               ["kappa", "method", "epsilon_sq",
                                "gradient_evals", "status"], rows)]

    if len(kappas) >= 2:
        slope_rows = []
        for eps_sq in eps_sq_list:
            for method in ("EM", "SKROCK"):
                pts = [(k, budgets[(method, eps_sq, k)]) for k in kappas
                       if (method, eps_sq, k) in budgets
                       and budgets[(method, eps_sq, k)] > 0]
                if len(pts) >= 2:
                    logk = np.log10([p[0] for p in pts])
                    logg = np.log10([p[1] for p in pts])
                    slope = float(np.polyfit(logk, logg, 1)[0])
                    slope_rows.append((method, eps_sq, slope))
        files.append(storage.write_csv(outdir / "w2_slopes.csv",
                                       ["method", "epsilon_sq", "slope"],
                                       slope_rows))

    manifest = {
        "command": "w2curves",
        "config": config,
        "files": {p.name: {"sha256": storage.file_sha256(p)} for p in files},
    }
    return storage.write_json(outdir / "manifest.json", manifest)


def run_stability(s: int, eta: float, p_min: float, p_max: float,
                  q2_max: float, resolution: int, outdir) -> Path:
    """Rasterise the mean-square stability regions and the true boundary."""
    if not np.isfinite([p_min, p_max, q2_max]).all():
        raise ConfigError("grid bounds must be finite")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    p = np.linspace(p_min, p_max, resolution)
    q2 = np.linspace(0.0, q2_max, resolution)

    files = []
    for name, stab in (("em", stability_em()), (f"skrock_{s}", stability_skrock(s, eta))):
        region = ms_stability_region(stab, p, q2)
        rows = ((float(p[i]), float(q2[j]), int(region[i, j]))
                for i in range(p.size) for j in range(q2.size))
        files.append(storage.write_csv(outdir / f"stability_{name}.csv",
                                       ["p", "q2", "stable"], rows))
    # True mean-square stability boundary of the test equation: q^2 = -2p.
    files.append(storage.write_csv(
        outdir / "stability_boundary.csv", ["p", "q2"],
        ((float(pi), float(-2.0 * pi)) for pi in p if pi <= 0)))

    manifest = {
        "command": "stability",
        "config": {"s": s, "eta": eta, "p_min": p_min, "p_max": p_max,
                   "q2_max": q2_max, "resolution": resolution},
        "files": {f.name: {"sha256": storage.file_sha256(f)} for f in files},
    }
    return storage.write_json(outdir / "manifest.json", manifest)
