"""Scene files: a versioned JSON document describing a configuration.

Example::

    {
      "version": 1,
      "dimension": 2,
      "balls": [{"center": [0, 0], "radius": 0.2}, ...],
      "correspondence": {"map": {"type": "moebius", "mirrors": [...]}},
      "experiment": {"depth": 3, "grid": 64, "radii": [1e-3, 1e-4]}
    }
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .moebius import Ball, LinearMap, MoebiusMap, Plane, Sphere
from .schottky import SchottkySet

SCENE_VERSION = 1

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_sphere = {
    "type": "object",
    "properties": {"center": _vector, "radius": {"type": "number", "exclusiveMinimum": 0}},
    "required": ["center", "radius"],
    "additionalProperties": False,
}
_plane = {
    "type": "object",
    "properties": {"normal": _vector, "offset": {"type": "number"}},
    "required": ["normal", "offset"],
    "additionalProperties": False,
}
_mirror = {"oneOf": [_sphere, _plane]}
_ball = {
    "type": "object",
    "properties": {
        "center": _vector,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "normal": _vector,
        "offset": {"type": "number"},
        "side": {"enum": ["interior", "exterior"]},
    },
    "oneOf": [{"required": ["center", "radius"]}, {"required": ["normal", "offset"]}],
    "additionalProperties": False,
}
_map = {
    "type": "object",
    "properties": {
        "type": {"enum": ["identity", "moebius", "linear"]},
        "mirrors": {"type": "array", "items": _mirror},
        "matrix": {"type": "array", "items": _vector},
        "translation": _vector,
    },
    "required": ["type"],
    "additionalProperties": False,
}
_bmap = {
    "type": "object",
    "properties": {
        "type": {"enum": ["moebius", "table", "projected"]},
        "mirrors": {"type": "array", "items": _mirror},
        "directions": {"type": "array", "items": _vector, "minItems": 3},
    },
    "required": ["type"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "version": {"const": SCENE_VERSION},
        "dimension": {"type": "integer", "minimum": 1},
        "label": {"type": "string"},
        "balls": {"type": "array", "items": _ball},
        "correspondence": {
            "type": "object",
            "properties": {
                "map": _map,
                "target_balls": {"type": "array", "items": _ball},
                "pairing": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "boundary_maps": {"type": "array", "items": _bmap},
                "base_strategy": {"enum": ["moebius_if_available", "radial"]},
                "strict": {"type": "boolean"},
            },
            "required": ["map"],
            "additionalProperties": False,
        },
        "denjoy": {
            "type": "object",
            "properties": {
                "alpha": {"type": "number"},
                "weights": {"enum": ["geometric", "inverse_square", "zero"]},
                "N": {"type": "integer", "minimum": 1},
                "total": {"type": ["number", "null"]},
            },
            "additionalProperties": False,
        },
        "torus": {
            "type": "object",
            "properties": {
                "rho": _vector,
                "p0": _vector,
                "N": {"type": "integer", "minimum": 1},
                "radius_rule": {"oneOf": [{"enum": ["decreasing"]}, {"type": "number", "exclusiveMinimum": 0}]},
            },
            "additionalProperties": False,
        },
        "experiment": {
            "type": "object",
            "properties": {
                "depth": {"type": "integer", "minimum": 0},
                "max_depth": {"type": "integer", "minimum": 0},
                "grid": {"type": "integer", "minimum": 1},
                "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "directions": {"type": "integer", "minimum": 4},
                "samples": {"type": "integer", "minimum": 3},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["version", "dimension"],
    "additionalProperties": False,
}


class SceneError(ValueError):
    """Unreadable or invalid scene file."""


# -- canonical form and hash -------------------------------------------------

def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _canon(obj) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise SceneError("non-finite number in scene")
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + _canon(obj[k]) for k in sorted(obj)) + "}"
    raise SceneError(f"cannot canonicalise {type(obj).__name__}")


def canonical_json(doc) -> str:
    """Sorted keys, no whitespace, floats at 17 significant digits."""
    return _canon(doc)


def scene_hash(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


# -- loading ------------------------------------------------------------------

def validate_document(doc) -> dict:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SceneError(f"schema error at {where}: {e.message}")
    n = doc["dimension"]
    for path, vec in _vectors(doc):
        if len(vec) != n:
            raise SceneError(f"{path}: expected {n} coordinates, got {len(vec)}")
    return doc


def _vectors(doc):
    for key in ("balls",):
        for i, b in enumerate(doc.get(key, [])):
            yield f"{key}/{i}", b.get("center", b.get("normal"))
    corr = doc.get("correspondence", {})
    for i, b in enumerate(corr.get("target_balls", [])):
        yield f"correspondence/target_balls/{i}", b.get("center", b.get("normal"))
    for i, m in enumerate(corr.get("map", {}).get("mirrors", [])):
        yield f"correspondence/map/mirrors/{i}", m.get("center", m.get("normal"))


def load_document(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return validate_document(doc)


# -- building objects ---------------------------------------------------------

def mirror_from(d) -> Sphere | Plane:
    if "radius" in d:
        return Sphere(d["center"], d["radius"])
    return Plane(np.asarray(d["normal"], float) / np.linalg.norm(d["normal"]), d["offset"])


def ball_from(d) -> Ball:
    return Ball(mirror_from(d), d.get("side", "interior"))


def ball_to_dict(b: Ball) -> dict:
    s = b.sphere
    d = {"center": s.center.tolist(), "radius": s.radius} if isinstance(s, Sphere) else \
        {"normal": s.normal.tolist(), "offset": s.offset}
    if b.side != "interior":
        d["side"] = b.side
    return d


@dataclass
class Scene:
    doc: dict
    hash: str

    @property
    def dim(self) -> int:
        return self.doc["dimension"]

    @property
    def experiment(self) -> dict:
        return self.doc.get("experiment", {})

    def schottky_set(self) -> SchottkySet:
        if not self.doc.get("balls"):
            raise SceneError("scene has no removed balls")
        return SchottkySet(tuple(ball_from(b) for b in self.doc["balls"]), self.doc.get("label"))

    def point_map(self):
        corr = self.doc.get("correspondence")
        if corr is None:
            raise SceneError("scene has no correspondence")
        m = corr["map"]
        if m["type"] == "identity":
            return MoebiusMap.identity(self.dim)
        if m["type"] == "moebius":
            return MoebiusMap(tuple(mirror_from(x) for x in m.get("mirrors", [])), self.dim)
        if "matrix" not in m:
            raise SceneError("linear map needs a matrix")
        return LinearMap(m["matrix"], m.get("translation"))

    def equivariant_map(self, max_depth=None):
        from . import extension as ext

        corr = self.doc.get("correspondence")
        if corr is None:
            raise SceneError("scene has no correspondence")
        source = self.schottky_set()
        g = self.point_map()
        strategy = corr.get("base_strategy", "moebius_if_available")
        depth = self.experiment.get("max_depth", 20) if max_depth is None else max_depth
        m = len(source)
        pairing = tuple(corr.get("pairing", range(m)))
        if len(pairing) != m:
            raise SceneError(f"pairing lists {len(pairing)} entries for {m} balls")

        if "target_balls" in corr:
            target = SchottkySet(tuple(ball_from(b) for b in corr["target_balls"]))
        elif isinstance(g, MoebiusMap):
            target = SchottkySet(tuple(g.image_of_ball(b) for b in source.balls))
        else:
            raise SceneError("target_balls are required unless the map is Moebius")

        entries = corr.get("boundary_maps")
        if entries is None:
            entries = [{"type": "moebius"} if isinstance(g, MoebiusMap) else {"type": "projected"}] * m
        if len(entries) != m:
            raise SceneError(f"boundary_maps lists {len(entries)} entries for {m} balls")
        bmaps = []
        for i, entry in enumerate(entries):
            src, tgt = source.balls[i].sphere, target.balls[pairing[i]].sphere
            if entry["type"] == "moebius":
                mm = g if "mirrors" not in entry else MoebiusMap(tuple(mirror_from(x) for x in entry["mirrors"]), self.dim)
                if not isinstance(mm, MoebiusMap):
                    raise SceneError(f"boundary_maps/{i}: Moebius boundary map needs mirrors")
                bmaps.append(ext.MoebiusBoundaryMap(mm))
            elif entry["type"] == "table":
                if "directions" not in entry:
                    raise SceneError(f"boundary_maps/{i}: table needs directions")
                table = np.asarray(entry["directions"], dtype=np.float64)
                bmaps.append(ext.TableBoundaryMap(src, tgt, table / np.linalg.norm(table, axis=1, keepdims=True)))
            else:
                bmaps.append(ext.TableBoundaryMap.from_function(src, tgt, g))
        bc = ext.BoundaryCorrespondence(source, target, pairing, tuple(bmaps))
        return ext.build_equivariant_map(bc, g, strategy, depth, strict=corr.get("strict", True))


def load_scene(path) -> Scene:
    doc = load_document(path)
    return Scene(doc, scene_hash(doc))


def scene_from_dict(doc) -> Scene:
    validate_document(doc)
    return Scene(doc, scene_hash(doc))
