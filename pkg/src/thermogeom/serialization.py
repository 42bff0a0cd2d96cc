"""JSON codecs for the shared file formats, plus atomic artifact writing.

Complex matrices travel as nested arrays of [re, im] pairs, row-major;
this format is shared by every module.  Floats are rendered with 17
significant digits so artifacts round-trip and diff cleanly.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from . import exprlang
from .contact import MMetricSpec, MuExtension
from .connection import ConnectionSpec
from .errors import ValidationError
from .gibbs import ObservableSet
from .linalg import HermitianOperator
from .processes import ParamPath

__all__ = [
    "format_float",
    "complex_matrix_to_json",
    "complex_matrix_from_json",
    "observable_set_to_json",
    "observable_set_from_json",
    "path_from_json",
    "path_to_json",
    "mmetric_spec_from_json",
    "connection_spec_from_json",
    "mu_extension_from_json",
    "load_json_file",
    "atomic_write_text",
]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def complex_matrix_to_json(matrix: np.ndarray) -> list:
    m = np.asarray(matrix, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def complex_matrix_from_json(obj: Any, expect_dim: int | None = None) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ValidationError("matrix must be a nonempty nested array")
    dim = len(obj)
    if expect_dim is not None and dim != expect_dim:
        raise ValidationError(f"matrix has {dim} rows, expected {expect_dim}")
    out = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != dim:
            raise ValidationError(f"matrix row {i} must have {dim} entries")
        for j, cell in enumerate(row):
            if (
                not isinstance(cell, list)
                or len(cell) != 2
                or not all(isinstance(v, (int, float)) for v in cell)
            ):
                raise ValidationError(
                    f"matrix entry ({i}, {j}) must be a [re, im] pair"
                )
            out[i, j] = complex(cell[0], cell[1])
    return out


def observable_set_to_json(obs: ObservableSet) -> dict:
    return {
        "dim": obs.dim,
        "observables": [
            {"name": name, "matrix": complex_matrix_to_json(op.matrix)}
            for name, op in zip(obs.names, obs.observables)
        ],
    }


def observable_set_from_json(obj: Any) -> ObservableSet:
    if not isinstance(obj, dict):
        raise ValidationError("observable set must be a JSON object")
    dim = obj.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"invalid dim {dim!r}")
    entries = obj.get("observables")
    if not isinstance(entries, list) or not entries:
        raise ValidationError("observables must be a nonempty array")
    ops = []
    names = []
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict) or "matrix" not in entry:
            raise ValidationError(f"observable {k} must be an object with a matrix")
        names.append(str(entry.get("name", f"A{k + 1}")))
        ops.append(HermitianOperator(complex_matrix_from_json(entry["matrix"], dim)))
    return ObservableSet(ops, names)


def path_to_json(path: ParamPath) -> dict:
    return {
        "duration": path.duration,
        "samples": [list(map(float, row)) for row in path.samples],
    }


def path_from_json(obj: Any, n: int) -> ParamPath:
    """Either explicit samples or lambda_exprs in t evaluated on the grid."""
    if not isinstance(obj, dict):
        raise ValidationError("path must be a JSON object")
    duration = obj.get("duration")
    if not isinstance(duration, (int, float)) or duration <= 0:
        raise ValidationError(f"invalid path duration {duration!r}")
    if "samples" in obj:
        samples = np.asarray(obj["samples"], dtype=float)
        if samples.ndim != 2 or samples.shape[1] != n:
            raise ValidationError(
                f"path samples must be rows of {n} coordinates"
            )
        return ParamPath(float(duration), samples)
    if "lambda_exprs" in obj:
        steps = obj.get("steps")
        if not isinstance(steps, int) or steps < 8:
            raise ValidationError(f"steps must be an integer >= 8, got {steps!r}")
        texts = obj["lambda_exprs"]
        if not isinstance(texts, list) or len(texts) != n:
            raise ValidationError(f"lambda_exprs must list {n} expressions")
        exprs = [exprlang.parse(t, n) for t in texts]
        for k, e in enumerate(exprs):
            extra = exprlang.free_vars(e) - {"t"}
            if extra:
                raise ValidationError(
                    f"path expression {k + 1} may only use t, found {sorted(extra)}"
                )
        ts = np.linspace(0.0, float(duration), steps + 1)
        samples = np.array(
            [[exprlang.eval_expr(e, {"t": t}) for e in exprs] for t in ts]
        )
        return ParamPath(float(duration), samples, provenance="expression-defined")
    raise ValidationError("path needs either samples or lambda_exprs")


def _expr_list(obj: Any, key: str, n: int) -> list[str]:
    texts = obj.get(key)
    if not isinstance(texts, list) or len(texts) != n:
        raise ValidationError(f"{key} must list {n} expression strings")
    if not all(isinstance(t, str) for t in texts):
        raise ValidationError(f"{key} entries must be strings")
    return texts


def mmetric_spec_from_json(obj: Any, n: int) -> MMetricSpec:
    if not isinstance(obj, dict) or not isinstance(obj.get("g_S"), str):
        raise ValidationError("metric spec needs a g_S expression string")
    return MMetricSpec.parsed(obj["g_S"], _expr_list(obj, "g_a", n), _expr_list(obj, "h", n), n)


def connection_spec_from_json(obj: Any, n: int) -> ConnectionSpec:
    if not isinstance(obj, dict) or not isinstance(obj.get("g_S"), str):
        raise ValidationError("connection spec needs a g_S expression string")
    fd_step = obj.get("fd_step", 1e-5)
    if not isinstance(fd_step, (int, float)):
        raise ValidationError(f"fd_step must be a number, got {fd_step!r}")
    return ConnectionSpec.parsed(obj["g_S"], _expr_list(obj, "h", n), n, float(fd_step))


def mu_extension_from_json(obj: Any, obs: ObservableSet) -> MuExtension:
    if not isinstance(obj, dict):
        raise ValidationError("mu extension must be a JSON object")
    return MuExtension.validated(_expr_list(obj, "f", obs.n), obs)


def load_json_file(path: str | Path) -> Any:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {p}: {exc}") from None


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file and rename, so no partial artifact can appear."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
