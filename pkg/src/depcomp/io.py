"""File formats: system documents, sample CSVs, tensor and result documents.

All structured documents are JSON with every float rendered to 17 significant
digits, which round-trips 64-bit values exactly, so saving what was loaded
reproduces the file byte for byte.  Writes go through a temp-file-and-rename
so readers never observe partial files.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .core import Channel, DCSystem, Distribution, JointTensor
from .inversion import InversionConfig, InversionResult
from .sampling import SampleBatch


def _render_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    s = format(x, ".17g")
    # Keep a decimal marker so the value parses back as a float, not an int.
    if "e" not in s and "E" not in s and "." not in s:
        s += ".0"
    return s


def _is_scalar(x) -> bool:
    return x is None or isinstance(x, (bool, int, float, str, np.integer, np.floating))


def _render(obj, depth: int) -> str:
    pad = "  " * depth
    inner = "  " * (depth + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _render_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        items = list(obj)
        if not items:
            return "[]"
        if all(_is_scalar(v) for v in items):
            return "[" + ", ".join(_render(v, 0) for v in items) + "]"
        return (
            "[\n"
            + ",\n".join(inner + _render(v, depth + 1) for v in items)
            + "\n"
            + pad
            + "]"
        )
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError(f"document keys must be strings, got {key!r}")
            parts.append(inner + json.dumps(key) + ": " + _render(value, depth + 1))
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_json(obj) -> str:
    """Serialize a document with round-trip-exact float rendering."""
    return _render(obj, 0) + "\n"


def write_text_atomic(path, text: str) -> None:
    """Write via a sibling temp file and rename, so the path is never partial."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp.", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _require_keys(doc: dict, keys: tuple, what: str) -> None:
    if not isinstance(doc, dict):
        raise ValueError(f"{what}: expected a JSON object")
    missing = [k for k in keys if k not in doc]
    extra = [k for k in doc if k not in keys]
    if missing:
        raise ValueError(f"{what}: missing keys {missing}")
    if extra:
        raise ValueError(f"{what}: unknown keys {extra}")


def _as_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{what} must be an integer, got {value!r}")
    return value


def system_document(system: DCSystem) -> dict:
    return {
        "L": system.hidden_size,
        "Lprime": system.output_size,
        "K": system.num_channels,
        "p": system.p.probs,
        "channels": [ch.entries for ch in system.channels],
    }


def save_system(path, system: DCSystem) -> None:
    write_text_atomic(path, render_json(system_document(system)))


def load_system(path) -> DCSystem:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    _require_keys(doc, ("L", "Lprime", "K", "p", "channels"), "system file")
    L = _as_int(doc["L"], "L")
    Lprime = _as_int(doc["Lprime"], "Lprime")
    K = _as_int(doc["K"], "K")
    p = doc["p"]
    channels = doc["channels"]
    if not isinstance(p, list) or len(p) != L:
        raise ValueError(f"system file: p must be a list of L={L} reals")
    if not isinstance(channels, list) or len(channels) != K:
        raise ValueError(f"system file: channels must list K={K} matrices")
    built = []
    for k, mat in enumerate(channels, start=1):
        if (
            not isinstance(mat, list)
            or len(mat) != Lprime
            or any(not isinstance(row, list) or len(row) != L for row in mat)
        ):
            raise ValueError(f"system file: channel {k} must be {Lprime} rows x {L} columns")
        built.append(Channel(np.array(mat, dtype=np.float64)))
    return DCSystem(Distribution(np.array(p, dtype=np.float64)), tuple(built))


def save_tensor(path, t: JointTensor) -> None:
    write_text_atomic(path, render_json({"shape": list(t.shape), "values": t.values}))


def load_tensor(path) -> JointTensor:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    _require_keys(doc, ("shape", "values"), "tensor file")
    shape = doc["shape"]
    values = doc["values"]
    if not isinstance(shape, list) or not all(isinstance(s, int) for s in shape):
        raise ValueError("tensor file: shape must be a list of integers")
    if not isinstance(values, list):
        raise ValueError("tensor file: values must be a list of reals")
    return JointTensor(tuple(shape), np.array(values, dtype=np.float64))


def save_samples(path, batch: SampleBatch) -> None:
    header = "t," + ",".join(f"y{k}" for k in range(1, batch.num_channels + 1))
    lines = [header]
    for t, row in enumerate(batch.records, start=1):
        lines.append(str(t) + "," + ",".join(str(int(y)) for y in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def load_samples(path, output_size: int | None = None) -> SampleBatch:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln != ""]
    if not lines:
        raise ValueError("sample file: empty")
    header = lines[0].split(",")
    K = len(header) - 1
    if K < 1 or header != ["t"] + [f"y{k}" for k in range(1, K + 1)]:
        raise ValueError(f"sample file: bad header {lines[0]!r}")
    records = np.empty((len(lines) - 1, K), dtype=np.int64)
    for idx, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != K + 1:
            raise ValueError(f"sample file: row {idx} has {len(cells)} fields, expected {K + 1}")
        try:
            parsed = [int(c) for c in cells]
        except ValueError:
            raise ValueError(f"sample file: row {idx} has non-integer fields") from None
        if parsed[0] != idx:
            raise ValueError(f"sample file: row counter {parsed[0]} at line {idx + 1}, expected {idx}")
        records[idx - 1] = parsed[1:]
    if output_size is None:
        output_size = int(records.max())
    return SampleBatch(output_size, records)


def result_document(result: InversionResult, config: InversionConfig) -> dict:
    from . import __version__

    return {
        "library_version": __version__,
        "seed": int(config.seed),
        "config": {
            "L": config.L,
            "objective": config.objective,
            "restarts": config.restarts,
            "max_iters": config.max_iters,
            "step_tol": config.step_tol,
            "objective_tol": config.objective_tol,
            "seed": int(config.seed),
            "smoothing_eps": config.smoothing_eps,
        },
        "objective": {"kind": config.objective, "value": result.objective_value},
        "converged": result.converged,
        "best_restart": result.best_restart,
        "near_boundary": result.near_boundary,
        "p_hat": result.p_hat.probs,
        "channels_hat": [ch.entries for ch in result.channels_hat],
        "restart_log": [
            {
                "restart": entry.restart,
                "objective": entry.objective,
                "iterations": entry.iterations,
                "converged": entry.converged,
            }
            for entry in result.restart_log
        ],
    }


def save_result(path, result: InversionResult, config: InversionConfig) -> None:
    write_text_atomic(path, render_json(result_document(result, config)))


def load_result(path) -> dict:
    """Load a result document as a plain dict (floats parse back exactly)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("result file: expected a JSON object")
    return doc
