"""JSON model files: ``{"num_vertices": n, "edges": [{"u": 0, "v": 1, "j": 0.5}, ...]}``."""

from __future__ import annotations

import json
import math

import numpy as np

from .graph import Graph
from .model import IsingModel


class ModelFileError(ValueError):
    """Base class of model file problems."""


class MalformedModel(ModelFileError):
    pass


class DuplicateEdge(ModelFileError):
    pass


class SelfLoop(ModelFileError):
    pass


class VertexOutOfRange(ModelFileError):
    pass


def _int_field(obj, key, where):
    val = obj.get(key) if isinstance(obj, dict) else None
    if isinstance(val, bool) or not isinstance(val, int):
        raise MalformedModel(f"{where}: field {key!r} must be an integer")
    return val


def parse_model_file(text: str) -> IsingModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedModel("top level must be an object")
    n = _int_field(doc, "num_vertices", "model")
    if n < 0:
        raise MalformedModel("num_vertices must be nonnegative")
    records = doc.get("edges")
    if not isinstance(records, list):
        raise MalformedModel("field 'edges' must be a list")
    seen: dict[tuple[int, int], int] = {}
    edges, J = [], []
    for i, rec in enumerate(records):
        where = f"edge {i}"
        u = _int_field(rec, "u", where)
        v = _int_field(rec, "v", where)
        j = rec.get("j")
        if isinstance(j, bool) or not isinstance(j, (int, float)) or not math.isfinite(j):
            raise MalformedModel(f"{where}: field 'j' must be a finite number")
        if not (0 <= u < n and 0 <= v < n):
            raise VertexOutOfRange(f"{where}: ({u}, {v}) outside 0..{n - 1}")
        if u == v:
            raise SelfLoop(f"{where}: self-loop at vertex {u}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise DuplicateEdge(f"{where}: repeats edge {seen[key]} {key}")
        seen[key] = i
        edges.append(key)
        J.append(float(j))
    return IsingModel(Graph(n, tuple(edges)), np.asarray(J, dtype=np.float64))


def write_model_file(model: IsingModel) -> str:
    recs = []
    for (u, v), j in zip(model.graph.edges, model.couplings.tolist()):
        a, b = (u, v) if u < v else (v, u)
        recs.append(f'    {{"u": {a}, "v": {b}, "j": {json.dumps(j)}}}')
    body = ",\n".join(recs)
    if recs:
        body = "\n" + body + "\n  "
    return f'{{\n  "num_vertices": {model.num_vertices},\n  "edges": [{body}]\n}}\n'


def read_model(path: str) -> IsingModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model_file(fh.read())
