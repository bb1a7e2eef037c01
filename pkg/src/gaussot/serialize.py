"""Parsing and emission of problem documents, solutions and sweep tables.

Numbers serialize with 17 significant digits so every double round-trips
bit-for-bit through text.  The JSON emitter is hand-rolled to keep float
formatting and key order deterministic; CSV uses '.' decimals with no
locale dependence.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .closed_form import Problem, ReferencePlan
from .errors import ValidationError
from .gaussians import CorrelationMatrix
from .linalg import SpdMatrix


def format_float(x) -> str:
    return format(float(x), ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(float(obj)):
            raise ValidationError(f"cannot serialize non-finite number {obj!r}")
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps(v, indent + 2) for v in obj]
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(inner + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 2)}" for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise ValidationError(f"cannot serialize object of type {type(obj).__name__}")


def _require(doc: dict, field: str):
    if field not in doc:
        raise ValidationError(f"missing required field '{field}'")
    return doc[field]


def _parse_matrix(value, field: str, rows: int, cols: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"field '{field}' is not a numeric matrix: {exc}") from exc
    if arr.shape != (rows, cols):
        raise ValidationError(
            f"field '{field}' must be a {rows}x{cols} row-major matrix, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"field '{field}' has non-finite entries")
    return arr


def parse_reference(doc, d: int) -> ReferencePlan:
    if not isinstance(doc, dict):
        raise ValidationError("field 'reference' must be an object with a 'type'")
    kind = _require(doc, "type")
    if kind == "product":
        return ReferencePlan.product()
    if kind == "correlation":
        r = _parse_matrix(_require(doc, "R"), "reference.R", d, d)
        try:
            return ReferencePlan.from_correlation(CorrelationMatrix(r))
        except ValidationError as exc:
            raise ValidationError(f"field 'reference.R': {exc}") from exc
    if kind == "full":
        sigma = _parse_matrix(_require(doc, "Sigma"), "reference.Sigma", 2 * d, 2 * d)
        try:
            return ReferencePlan.from_covariance(SpdMatrix(sigma))
        except ValidationError as exc:
            raise ValidationError(f"field 'reference.Sigma': {exc}") from exc
    raise ValidationError(f"field 'reference.type' must be product|correlation|full, got {kind!r}")


def parse_problem(doc) -> Problem:
    """Build a validated Problem from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ValidationError("problem document must be a JSON object")
    d = _require(doc, "d")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ValidationError(f"field 'd' must be a positive integer, got {d!r}")
    a = _parse_matrix(_require(doc, "A"), "A", d, d)
    b = _parse_matrix(_require(doc, "B"), "B", d, d)
    eps = _require(doc, "epsilon")
    if isinstance(eps, bool) or not isinstance(eps, (int, float)) or not math.isfinite(eps) or eps <= 0:
        raise ValidationError(f"field 'epsilon' must be a positive real, got {eps!r}")
    reference = parse_reference(_require(doc, "reference"), d)
    try:
        a_spd, b_spd = SpdMatrix(a), SpdMatrix(b)
    except ValidationError as exc:
        raise ValidationError(f"marginal covariance: {exc}") from exc
    return Problem(a=a_spd, b=b_spd, reference=reference, epsilon=float(eps))


def parse_sweep(doc) -> tuple[Problem, str, list[float]]:
    """Sweep document: a base problem, an axis and a strictly increasing grid."""
    if not isinstance(doc, dict):
        raise ValidationError("sweep document must be a JSON object")
    base = parse_problem(_require(doc, "base"))
    axis = _require(doc, "axis")
    if axis not in ("epsilon", "rho"):
        raise ValidationError(f"field 'axis' must be 'epsilon' or 'rho', got {axis!r}")
    raw = _require(doc, "values")
    if not isinstance(raw, list) or not raw:
        raise ValidationError("field 'values' must be a non-empty array of numbers")
    values = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(f"field 'values' has a non-numeric entry {v!r}")
        values.append(float(v))
    if any(v2 <= v1 for v1, v2 in zip(values, values[1:])):
        raise ValidationError("field 'values' must be strictly increasing")
    if axis == "epsilon":
        if values[0] < 0:
            raise ValidationError("epsilon values must be nonnegative")
    else:
        if base.dim != 1:
            raise ValidationError("rho sweeps are only defined for 1-D problems")
        if base.reference.kind == "full":
            raise ValidationError("rho sweeps need a product or correlation base reference")
        if values[0] <= -1.0 or values[-1] >= 1.0:
            raise ValidationError("rho values must lie strictly inside (-1, 1)")
    return base, axis, values


def solution_document(problem, solution, status) -> dict:
    return {
        "d": problem.dim,
        "epsilon": problem.epsilon,
        "reference": {"type": problem.reference.kind},
        "c_eps": solution.c_eps,
        "cost": solution.cost,
        "dual_f": solution.dual_f.mat,
        "dual_g": solution.dual_g.mat,
        "gradient_residual": solution.gradient_residual,
        "duality_gap": solution.duality_gap,
        "assumption": {
            "sufficient_condition": status.sufficient_condition,
            "tilt_invertible": status.tilt_invertible,
        },
    }


def sweep_header(d: int) -> list[str]:
    cols = ["epsilon", "rho", "status", "cost", "bw_cost", "bias"]
    cols += [f"c_{i}_{j}" for i in range(d) for j in range(d)]
    return cols


def sweep_csv(rows: list[dict], d: int) -> str:
    """CSV text for sweep rows; header + one line per grid value."""
    lines = [",".join(sweep_header(d))]
    for row in rows:
        cells = [format_float(row["epsilon"])]
        cells.append("" if row.get("rho") is None else format_float(row["rho"]))
        cells.append(row["status"])
        for key in ("cost", "bw_cost", "bias"):
            val = row.get(key)
            cells.append("" if val is None else format_float(val))
        c = row.get("c")
        if c is None:
            cells += [""] * (d * d)
        else:
            cells += [format_float(v) for v in np.asarray(c).ravel()]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
