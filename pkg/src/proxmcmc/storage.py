"""Trace persistence, deterministic JSON/CSV writing, and image loading.

Sample matrices are stored as flat little-endian float64 binaries next to a
JSON header; scalar curves go to CSV.  All writers are deterministic so
equal runs produce byte-identical output trees.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from .samplers import ChainTrace, SamplerConfig


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def file_sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def save_trace(outdir, stem: str, trace: ChainTrace) -> dict[str, str]:
    """Write samples (.samples.bin), header (.trace.json), and the trace
    statistic (.stat.csv) when stored.  Returns {kind: filename}."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}

    bin_name = f"{stem}.samples.bin"
    (outdir / bin_name).write_bytes(
        np.ascontiguousarray(trace.samples, dtype="<f8").tobytes())
    files["samples"] = bin_name

    header = {
        "dimension": int(trace.samples.shape[1]),
        "stored_iterations": int(trace.samples.shape[0]),
        "gradient_evals": int(trace.gradient_evals),
        "seed": int(trace.config.seed),
        "config": dataclasses.asdict(trace.config),
    }
    write_json(outdir / f"{stem}.trace.json", header)
    files["header"] = f"{stem}.trace.json"

    if trace.trace_statistic is not None:
        rows = zip(trace.stored_iteration_indices(), trace.trace_statistic)
        write_csv(outdir / f"{stem}.stat.csv",
                  ["iteration", "log_pi_lambda"],
                  ((int(i), float(v)) for i, v in rows))
        files["trace_statistic"] = f"{stem}.stat.csv"
    return files


def load_trace(header_path) -> ChainTrace:
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    stem = header_path.name.removesuffix(".trace.json")
    raw = (header_path.parent / f"{stem}.samples.bin").read_bytes()
    samples = np.frombuffer(raw, dtype="<f8").reshape(
        header["stored_iterations"], header["dimension"]).astype(float)
    config = SamplerConfig(**header["config"])

    stats = None
    stat_path = header_path.parent / f"{stem}.stat.csv"
    if stat_path.exists():
        stats = np.loadtxt(stat_path, delimiter=",", skiprows=1,
                           usecols=1, ndmin=1)
    return ChainTrace(
        samples=samples,
        trace_statistic=stats,
        gradient_evals=header["gradient_evals"],
        wall_time=0.0,
        config=config,
        initial_state=np.zeros(header["dimension"]),
    )


def read_pgm(path) -> np.ndarray:
    """Portable greymap (P2/P5, 8- or 16-bit) as a float array in [0, 1]."""
    data = Path(path).read_bytes()
    # Header tokens may be interleaved with comments.
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic = tokens[0]
    cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P2":
        values = np.array(data[pos:].split(), dtype=float)
    elif magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        values = np.frombuffer(data, dtype=dtype, count=rows * cols,
                               offset=pos).astype(float)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    return (values / maxval).reshape(rows, cols)


def read_raw_image(path) -> np.ndarray:
    """Flat float64 binary with a JSON sidecar {rows, cols} at path + '.json'."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    values = np.frombuffer(path.read_bytes(), dtype="<f8")
    return values.reshape(meta["rows"], meta["cols"]).astype(float)


def load_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    return read_raw_image(path)
