"""JSON scenario files.

Format::

    {"vertices": [{"id": 0, "arrival": 1, "deadline": 2,
                   "death_dist": [0.5, 0.5],
                   "death_dist_rational": ["1/2", "1/2"]}],   # optional
     "edges": [[0, 1]]}

``death_dist_rational`` wins over ``death_dist`` when both are present and
is emitted whenever a model carries exact fractions.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .errors import ScenarioError
from .model import StochasticModel, VertexSpec, validate_model

_TOP_KEYS = {"vertices", "edges"}
_VERTEX_KEYS = {"id", "arrival", "deadline", "death_dist", "death_dist_rational"}
_REQUIRED_VERTEX_KEYS = {"id", "arrival", "deadline", "death_dist"}


def _is_int(x: object) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_number(x: object) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _vertex_from_json(i: int, obj: object) -> VertexSpec:
    where = f"vertices[{i}]"
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(obj) - _VERTEX_KEYS
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = _REQUIRED_VERTEX_KEYS - set(obj)
    if missing:
        raise ScenarioError(f"{where}: missing field(s) {sorted(missing)}")
    for key in ("id", "arrival", "deadline"):
        if not _is_int(obj[key]):
            raise ScenarioError(f"{where}.{key}: expected an integer")
    dist = obj["death_dist"]
    if not isinstance(dist, list) or not all(_is_number(p) for p in dist):
        raise ScenarioError(f"{where}.death_dist: expected an array of numbers")
    probs: tuple = tuple(float(p) for p in dist)
    if "death_dist_rational" in obj:
        exact = obj["death_dist_rational"]
        if not isinstance(exact, list) or not all(isinstance(p, str) for p in exact):
            raise ScenarioError(f"{where}.death_dist_rational: expected an array of strings")
        try:
            probs = tuple(Fraction(p) for p in exact)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError(f"{where}.death_dist_rational: {exc}") from exc
        if len(exact) != len(dist):
            raise ScenarioError(f"{where}: death_dist and death_dist_rational differ in length")
    return VertexSpec(obj["id"], obj["arrival"], obj["deadline"], probs)


def parse_scenario(text: str) -> StochasticModel:
    """Parse and validate a scenario; raise :class:`ScenarioError` on any problem."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    if not isinstance(data, dict):
        raise ScenarioError("top level must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level field(s) {sorted(unknown)}")
    if not isinstance(data.get("vertices"), list):
        raise ScenarioError("'vertices' must be an array")
    edges_raw = data.get("edges", [])
    if not isinstance(edges_raw, list):
        raise ScenarioError("'edges' must be an array")

    vertices = [_vertex_from_json(i, v) for i, v in enumerate(data["vertices"])]
    edges = []
    for i, e in enumerate(edges_raw):
        if not (isinstance(e, list) and len(e) == 2 and all(_is_int(x) for x in e)):
            raise ScenarioError(f"edges[{i}]: expected a pair of integers")
        edges.append((e[0], e[1]))

    model = StochasticModel(tuple(vertices), tuple(edges))
    report = validate_model(model)
    if not report.ok:
        raise ScenarioError("invalid model: " + "; ".join(report.violations),
                            violations=list(report.violations))
    return model


def load_scenario(path: str | Path) -> StochasticModel:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def scenario_to_dict(m: StochasticModel) -> dict:
    verts = []
    for v in m.vertices:
        entry: dict = {
            "id": v.id,
            "arrival": v.arrival,
            "deadline": v.deadline,
            "death_dist": [float(p) for p in v.death_dist],
        }
        if any(isinstance(p, Fraction) for p in v.death_dist):
            entry["death_dist_rational"] = [str(Fraction(p)) for p in v.death_dist]
        verts.append(entry)
    return {"vertices": verts, "edges": [list(e) for e in m.edges]}


def serialize_scenario(m: StochasticModel) -> str:
    """Canonical text form: vertices and edges sorted by id."""
    return json.dumps(scenario_to_dict(m), indent=2) + "\n"
