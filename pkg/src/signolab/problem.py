"""Problem-file (JSON) reading and writing.

Schema::

    {
      "name": "endpoint",                       # optional
      "vertices": [[x, y], ...],                # counterclockwise
      "segments": [{"edges": [0, 1], "tag": "S", "data": ...}, ...],
      "lifting": <field>,                       # optional, g_D for D segments without data
      "load": <field>,                          # optional volume load f
      "gap": <field>,                           # optional gap psi for S segments without data
      "exact": <field>                          # optional closed-form solution
    }

``edges`` lists consecutive polygon edge indices (edge k joins vertex k and
k+1).  ``data`` is null, a list of at most five polynomial coefficients in
normalized segment arclength, or a field reference ``{"name", "params"}``.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json

from signolab.fields import Field, UnknownField
from signolab.geometry import BoundarySpec, GeometryError, Polygon, Segment

TOP_KEYS = {"name", "vertices", "segments", "lifting", "load", "gap", "exact"}
SEGMENT_KEYS = {"edges", "tag", "data"}


class ProblemFileError(ValueError):
    pass


def spec_from_dict(d: dict) -> BoundarySpec:
    if not isinstance(d, dict):
        raise ProblemFileError("problem must be a JSON object")
    unknown = set(d) - TOP_KEYS
    if unknown:
        raise ProblemFileError(f"unknown keys: {sorted(unknown)}")
    for key in ("vertices", "segments"):
        if key not in d:
            raise ProblemFileError(f"missing key {key!r}")
    segs = []
    for s in d["segments"]:
        if not isinstance(s, dict):
            raise ProblemFileError("segment entries must be objects")
        bad = set(s) - SEGMENT_KEYS
        if bad:
            raise ProblemFileError(f"unknown segment keys: {sorted(bad)}")
        if "edges" not in s or "tag" not in s:
            raise ProblemFileError("segment needs 'edges' and 'tag'")
        try:
            segs.append(Segment(tuple(s["edges"]), s["tag"], s.get("data")))
        except (UnknownField, GeometryError, TypeError, ValueError) as exc:
            raise ProblemFileError(f"bad segment {s!r}: {exc}") from exc
    try:
        return BoundarySpec(
            Polygon(tuple(tuple(v) for v in d["vertices"])),
            tuple(segs),
            lifting=d.get("lifting"),
            load=d.get("load"),
            gap=d.get("gap"),
            exact=d.get("exact"),
            name=d.get("name", ""),
        )
    except (UnknownField, GeometryError, TypeError) as exc:
        raise ProblemFileError(str(exc)) from exc


def spec_to_dict(spec: BoundarySpec) -> dict:
    def data(x):
        if x is None:
            return None
        if isinstance(x, Field):
            return x.to_json()
        return list(x)

    out = {"name": spec.name, "vertices": [list(v) for v in spec.polygon.vertices]}
    out["segments"] = [{"edges": list(s.edges), "tag": s.tag.value, "data": data(s.data)} for s in spec.segments]
    for key in ("lifting", "load", "gap", "exact"):
        v = getattr(spec, key)
        if v is not None:
            out[key] = v.to_json()
    return out


def dumps(spec: BoundarySpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> BoundarySpec:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON: {exc}") from exc
    return spec_from_dict(d)


def load(path) -> BoundarySpec:
    with open(path) as fh:
        return loads(fh.read())
