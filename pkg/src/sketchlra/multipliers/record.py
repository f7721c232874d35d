"""JSON text records for multiplier specs.

Grammar (one JSON object):

    record   := {"family": NAME, FIELD: value, ...}
    spec     := {"spec": record, "l": INT, "columns": "leftmost" | "random" | [INT, ...]}
    value    := number | string | bool | null | record | [value, ...] | array
    array    := {"array": [number, ...], "shape": [INT, ...]}
              | {"array": [[re, im], ...], "shape": [INT, ...], "complex": true}
    complex  := {"complex": [re, im]}

NAME is the family class name. Records of resolved specs replay exactly.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from . import families as fam
from .build import MultiplierSpec

_REGISTRY = {
    cls.__name__: cls
    for cls in vars(fam).values()
    if isinstance(cls, type) and issubclass(cls, fam.Family) and cls is not fam.Family
}


def _encode(value):
    if isinstance(value, fam.Family):
        return family_to_dict(value)
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            flat = np.stack((value.real.ravel(), value.imag.ravel()), axis=1).tolist()
            return {"array": flat, "shape": list(value.shape), "complex": True}
        out = {"array": value.ravel().tolist(), "shape": list(value.shape)}
        if value.dtype.kind in "iu":
            out["int"] = True
        return out
    if isinstance(value, (tuple, list)):
        return [_encode(v) for v in value]
    if isinstance(value, complex):
        return {"complex": [value.real, value.imag]}
    if isinstance(value, np.generic):
        return _encode(value.item())
    return value


def _decode(value):
    if isinstance(value, dict):
        if "family" in value:
            return family_from_dict(value)
        if "array" in value:
            data = np.asarray(value["array"], dtype=float)
            if value.get("complex"):
                data = data[:, 0] + 1j * data[:, 1] if data.size else data.astype(complex)
            arr = data.reshape(value["shape"])
            if value.get("int"):
                arr = arr.astype(int)
            return arr
        if "complex" in value:
            re, im = value["complex"]
            return complex(re, im)
        raise ValueError(f"unrecognized record object {sorted(value)}")
    if isinstance(value, list):
        return tuple(_decode(v) for v in value)
    return value


def family_to_dict(family: fam.Family) -> dict:
    out = {"family": type(family).__name__}
    for f in dataclasses.fields(family):
        v = getattr(family, f.name)
        out[f.name] = _encode(v)
    return out


def family_from_dict(d: dict) -> fam.Family:
    cls = _REGISTRY.get(d.get("family"))
    if cls is None:
        raise ValueError(f"unknown family {d.get('family')!r}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in d:
            v = _decode(d[f.name])
            if f.name in ("dist", "scaling") and isinstance(v, tuple):
                v = tuple(v)
            kwargs[f.name] = v
    return cls(**kwargs)


def spec_to_dict(spec) -> dict:
    if isinstance(spec, fam.Family):
        return family_to_dict(spec)
    cols = spec.columns
    cols = cols if isinstance(cols, str) else [int(c) for c in np.asarray(cols)]
    return {"spec": family_to_dict(spec.family), "l": spec.l, "columns": cols}


def spec_from_dict(d: dict):
    if "spec" not in d:
        return family_from_dict(d)
    cols = d["columns"]
    cols = cols if isinstance(cols, str) else np.asarray(cols, dtype=int)
    return MultiplierSpec(family_from_dict(d["spec"]), int(d["l"]), cols)


def dumps(spec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def loads(text: str):
    return spec_from_dict(json.loads(text))
