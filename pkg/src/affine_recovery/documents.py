"""JSON documents for problems, maps, certificates and oracle reports."""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any

import numpy as np

from .core import (
    COSINE,
    RKHS,
    AffineRecoveryMap,
    Certificate,
    DependenceSpec,
    ModelSetSpec,
    PointConfig,
    RecoveryProblem,
    ValidationError,
    validate_problem,
)


class DocumentError(ValueError):
    """A document is malformed (as opposed to well-formed but invalid)."""


def _need(doc: dict, key: str, where: str = "problem"):
    if not isinstance(doc, dict):
        raise DocumentError(f"{where} must be an object")
    if key not in doc:
        raise DocumentError(f"{where} is missing the field {key!r}")
    return doc[key]


def _number(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DocumentError(f"{what} must be a number, got {v!r}")
    return float(v)


def _numbers(v, what: str) -> list:
    if not isinstance(v, list):
        raise DocumentError(f"{what} must be a list of numbers")
    return [_number(x, what) for x in v]


def _function(doc, setting: str, what: str):
    if setting == RKHS:
        from .rkhs import AnchoredFunction

        anchors = _numbers(_need(doc, "anchors", what), f"{what} anchors")
        weights = _numbers(_need(doc, "weights", what), f"{what} weights")
        if len(anchors) != len(weights):
            raise DocumentError(f"{what}: anchors and weights differ in length")
        try:
            return AnchoredFunction(np.array(anchors), np.array(weights))
        except ValueError as exc:
            raise DocumentError(f"{what}: {exc}") from exc
    from .cosine import CosinePoly

    coeffs = doc if isinstance(doc, list) else _need(doc, "coeffs", what)
    vals = _numbers(coeffs, f"{what} coefficients")
    if not vals:
        raise DocumentError(f"{what} needs at least one coefficient")
    try:
        return CosinePoly(np.array(vals))
    except ValueError as exc:
        raise DocumentError(f"{what}: {exc}") from exc


def _function_document(f) -> dict:
    if hasattr(f, "anchors"):
        return {"anchors": f.anchors.tolist(), "weights": f.weights.tolist()}
    return {"coeffs": f.coeffs.tolist()}


def problem_from_document(doc: Any) -> RecoveryProblem:
    """Build and validate a problem; structural faults raise :class:`DocumentError`."""
    setting = _need(doc, "setting")
    if setting not in (RKHS, COSINE):
        raise DocumentError(f"setting must be 'rkhs' or 'cosine', got {setting!r}")
    sets_doc = _need(doc, "model_sets")
    if not isinstance(sets_doc, list):
        raise DocumentError("model_sets must be a list")
    sets = []
    for n, ms in enumerate(sets_doc):
        where = f"model_sets[{n}]"
        basis = _need(ms, "basis", where)
        if not isinstance(basis, list):
            raise DocumentError(f"{where}.basis must be a list")
        nonneg = ms.get("nonneg", False)
        if not isinstance(nonneg, bool):
            raise DocumentError(f"{where}.nonneg must be true or false")
        sets.append(ModelSetSpec(
            tuple(_function(f, setting, f"{where}.basis[{k}]") for k, f in enumerate(basis)),
            _number(_need(ms, "epsilon", where), f"{where}.epsilon"),
            nonneg,
        ))
    N = doc.get("N", len(sets))
    if isinstance(N, bool) or not isinstance(N, int):
        raise DocumentError("N must be an integer")

    dep = doc.get("dependence") or {"A": [], "b": []}
    A_doc = _need(dep, "A", "dependence")
    b_doc = _need(dep, "b", "dependence")
    if not isinstance(A_doc, list) or not all(isinstance(row, list) for row in A_doc):
        raise DocumentError("dependence.A must be a list of rows")
    if not isinstance(b_doc, list):
        raise DocumentError("dependence.b must be a list")
    rows = [_numbers(row, "dependence.A entries") for row in A_doc]
    width = {len(r) for r in rows}
    if len(width) > 1:
        raise DocumentError("dependence.A rows differ in length")
    A = np.array(rows, dtype=float).reshape(len(rows), width.pop() if width else N)
    b = tuple(_function(f, setting, f"dependence.b[{l}]") for l, f in enumerate(b_doc))

    kernel = None
    if setting == RKHS:
        from .rkhs import Kernel

        kdoc = _need(doc, "kernel")
        name = _need(kdoc, "name", "kernel")
        params = kdoc.get("params", {}) or {}
        if not isinstance(params, dict):
            raise DocumentError("kernel.params must be an object")
        try:
            kernel = Kernel(str(name), dict(params))
        except ValueError as exc:
            raise DocumentError(str(exc)) from exc
        default_domain = kernel.default_domain
    else:
        default_domain = (0.0, math.pi)
    domain = doc.get("domain", list(default_domain))
    domain = _numbers(domain, "domain")
    if len(domain) != 2:
        raise DocumentError("domain must be [lower, upper]")

    points = PointConfig(
        _number(_need(doc, "new_point"), "new_point"),
        tuple(_numbers(_need(doc, "old_points"), "old_points")),
    )
    problem = RecoveryProblem(setting, points, tuple(sets), DependenceSpec(A, b), kernel, tuple(domain))
    if N != len(sets):
        raise ValidationError([f"dimension mismatch: N={N} but {len(sets)} model sets"])
    return validate_problem(problem)


def problem_to_document(problem: RecoveryProblem) -> dict:
    doc = {
        "setting": problem.setting,
        "N": problem.N,
        "domain": list(problem.domain),
        "new_point": problem.points.new_point,
        "old_points": list(problem.points.old_points),
        "model_sets": [
            {"basis": [_function_document(f) for f in ms.basis], "epsilon": ms.epsilon, "nonneg": ms.nonneg}
            for ms in problem.model_sets
        ],
        "dependence": {"A": problem.dependence.A.tolist(),
                       "b": [_function_document(f) for f in problem.dependence.b]},
    }
    if problem.kernel is not None:
        doc["kernel"] = {"name": problem.kernel.name, "params": dict(problem.kernel.params)}
    return doc


def _plain(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, (np.floating, np.integer)):
        return _plain(x.item())
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    return x


def map_to_document(rmap: AffineRecoveryMap) -> dict:
    return _plain({
        "coeffs": rmap.coeffs.tolist(),
        "offsets": rmap.offsets.tolist(),
        "values": rmap.values.tolist(),
        "provenance": dict(rmap.provenance),
    })


def map_from_document(doc: Any) -> AffineRecoveryMap:
    try:
        coeffs = np.array(_need(doc, "coeffs", "map"), dtype=float)
        offsets = np.array(_need(doc, "offsets", "map"), dtype=float)
        values = np.array(doc.get("values", [0.0] * len(offsets)), dtype=float)
        return AffineRecoveryMap(coeffs, offsets, values, provenance=dict(doc.get("provenance", {})))
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"malformed map document: {exc}") from exc


def certificate_to_document(cert: Certificate) -> dict:
    return _plain({
        "lb": cert.lower,
        "ub": cert.upper,
        "ratio": cert.ratio,
        "r": cert.level_r,
        "s": cert.grid_s,
        "per_j": list(cert.per_j),
    })


def observations_from_document(doc: Any) -> np.ndarray:
    y = doc.get("y") if isinstance(doc, dict) else doc
    if not isinstance(y, list) or not all(isinstance(row, list) for row in y):
        raise DocumentError("observations must be a matrix (list of rows), optionally under the key 'y'")
    return np.array([_numbers(row, "observations") for row in y], dtype=float)


def read_json(path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise DocumentError(f"{path}: cannot read ({exc.strerror})") from exc


def dumps(doc: Any) -> str:
    return json.dumps(_plain(doc), indent=2, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


__all__ = [
    "DocumentError", "problem_from_document", "problem_to_document", "map_to_document",
    "map_from_document", "certificate_to_document", "observations_from_document",
    "read_json", "dumps", "write_atomic",
]
