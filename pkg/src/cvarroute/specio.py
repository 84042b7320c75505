"""Game documents on disk: strict JSON schema for specs, flow files, and
result serialization.

Parsing is strict: unknown fields are rejected with their location, wrong
shapes or non-numeric entries name the offending field, and the
finite-sample variant may load its draws from a headerless CSV resolved
relative to the spec file. A reference instance ships with the package
(``golden_spec_path``).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .costs import AffineAdditive, AffineUncertainSlope
from .equilibrium import EquilibriumResult
from .game import GameSpec, ODPair, PathDef
from .uncertainty import FiniteSamples, UniformBox


class SpecFormatError(ValueError):
    """A spec or flow document violates the schema."""


def golden_spec_path() -> Path:
    """Location of the bundled two-OD, five-path reference instance."""
    return Path(__file__).parent / "data" / "golden.json"


def _check_keys(obj: dict, where: str, required: tuple, optional: tuple = ()) -> None:
    if not isinstance(obj, dict):
        raise SpecFormatError(f"{where}: expected an object")
    for k in obj:
        if k not in required and k not in optional:
            raise SpecFormatError(f"{where}: unknown field '{k}'")
    for k in required:
        if k not in obj:
            raise SpecFormatError(f"{where}: missing field '{k}'")


def _as_array(value, where: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SpecFormatError(f"{where}: not a numeric array") from None
    if arr.ndim != ndim:
        raise SpecFormatError(f"{where}: expected a {ndim}-D array, got {arr.ndim}-D")
    return arr


def _parse_cost(doc: dict):
    _check_keys(doc, "cost", required=("type",), optional=("a", "b", "cu", "d"))
    kind = doc.get("type")
    if kind == "affine_additive":
        _check_keys(doc, "cost", required=("type", "a", "b", "cu"))
        return AffineAdditive(
            a=_as_array(doc["a"], "cost.a", 2),
            b=_as_array(doc["b"], "cost.b", 1),
            cu=_as_array(doc["cu"], "cost.cu", 2),
        )
    if kind == "affine_uncertain_slope":
        _check_keys(doc, "cost", required=("type", "a", "b", "cu", "d"))
        return AffineUncertainSlope(
            a=_as_array(doc["a"], "cost.a", 2),
            b=_as_array(doc["b"], "cost.b", 1),
            cu=_as_array(doc["cu"], "cost.cu", 2),
            d=_as_array(doc["d"], "cost.d", 3),
        )
    raise SpecFormatError(f"cost.type: unknown variant {kind!r}")


def _parse_uncertainty(doc: dict, base_dir: Path):
    _check_keys(doc, "uncertainty", required=("type",), optional=("lo", "hi", "draws", "csv"))
    kind = doc.get("type")
    if kind == "uniform_box":
        _check_keys(doc, "uncertainty", required=("type", "lo", "hi"))
        return UniformBox(
            lo=_as_array(doc["lo"], "uncertainty.lo", 1),
            hi=_as_array(doc["hi"], "uncertainty.hi", 1),
        )
    if kind == "finite_samples":
        has_draws = "draws" in doc
        has_csv = "csv" in doc
        if has_draws == has_csv:
            raise SpecFormatError("uncertainty: finite_samples needs exactly one of 'draws' or 'csv'")
        if has_draws:
            _check_keys(doc, "uncertainty", required=("type", "draws"))
            return FiniteSamples(draws=_as_array(doc["draws"], "uncertainty.draws", 2))
        _check_keys(doc, "uncertainty", required=("type", "csv"))
        csv_path = base_dir / str(doc["csv"])
        if not csv_path.exists():
            raise SpecFormatError(f"uncertainty.csv: file not found: {csv_path}")
        try:
            draws = np.loadtxt(csv_path, delimiter=",", ndmin=2, dtype=float)
        except ValueError as exc:
            raise SpecFormatError(f"uncertainty.csv: {exc}") from None
        return FiniteSamples(draws=draws)
    raise SpecFormatError(f"uncertainty.type: unknown variant {kind!r}")


def parse_spec(doc: dict, base_dir: Path) -> GameSpec:
    """Build a GameSpec from a parsed JSON document (strict)."""
    _check_keys(doc, "spec", required=("od_pairs", "paths", "cost", "uncertainty", "alpha"))
    if not isinstance(doc["od_pairs"], list) or not doc["od_pairs"]:
        raise SpecFormatError("od_pairs: expected a nonempty list")
    if not isinstance(doc["paths"], list) or not doc["paths"]:
        raise SpecFormatError("paths: expected a nonempty list")
    od_pairs = []
    for i, od in enumerate(doc["od_pairs"]):
        _check_keys(od, f"od_pairs[{i}]", required=("id", "demand"))
        if not isinstance(od["id"], str):
            raise SpecFormatError(f"od_pairs[{i}].id: expected a string")
        if not isinstance(od["demand"], (int, float)) or isinstance(od["demand"], bool):
            raise SpecFormatError(f"od_pairs[{i}].demand: expected a number")
        od_pairs.append(ODPair(id=od["id"], demand=float(od["demand"])))
    paths = []
    for i, p in enumerate(doc["paths"]):
        _check_keys(p, f"paths[{i}]", required=("id", "od"))
        if not isinstance(p["id"], str) or not isinstance(p["od"], str):
            raise SpecFormatError(f"paths[{i}]: id and od must be strings")
        paths.append(PathDef(id=p["id"], od=p["od"]))
    if not isinstance(doc["alpha"], (int, float)) or isinstance(doc["alpha"], bool):
        raise SpecFormatError("alpha: expected a number")
    return GameSpec(
        od_pairs=tuple(od_pairs),
        paths=tuple(paths),
        cost_model=_parse_cost(doc["cost"]),
        uncertainty=_parse_uncertainty(doc["uncertainty"], base_dir),
        alpha=float(doc["alpha"]),
    )


def load_spec(path: str | Path) -> GameSpec:
    """Read and strictly parse a spec file; 'golden' means the bundled one."""
    p = golden_spec_path() if str(path) == "golden" else Path(path)
    if not p.exists():
        raise SpecFormatError(f"spec file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{p}: invalid JSON: {exc}") from None
    return parse_spec(doc, p.parent)


def load_golden_spec() -> GameSpec:
    return load_spec(golden_spec_path())


def load_flow(path: str | Path, num_paths: int) -> np.ndarray:
    """Read a flow vector: a JSON array, or any object with a "flow"
    field (extra fields are ignored so solver output files work as-is)."""
    p = Path(path)
    if not p.exists():
        raise SpecFormatError(f"flow file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{p}: invalid JSON: {exc}") from None
    if isinstance(doc, dict):
        if "flow" not in doc:
            raise SpecFormatError("flow document: missing field 'flow'")
        doc = doc["flow"]
    arr = _as_array(doc, "flow", 1)
    if arr.size != num_paths:
        raise SpecFormatError(f"flow: has {arr.size} entries, spec defines {num_paths} paths")
    return arr


def result_to_json(res: EquilibriumResult, spec: GameSpec, mode: str) -> dict:
    """Solver result as a JSON-ready dict (deterministic, no clock data)."""
    return {
        "mode": mode,
        "path_ids": list(spec.path_ids),
        "flow": [float(x) for x in res.flow],
        "path_risks": [float(x) for x in res.path_risks],
        "residual": float(res.residual),
        "iterations": int(res.iterations),
        "converged": bool(res.converged),
        "n_samples": res.n_samples,
        "seed": res.seed,
    }
