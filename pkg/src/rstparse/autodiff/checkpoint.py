"""JSON checkpoint files.

Layout::

    {
      "format": "rstparse-checkpoint",
      "version": 1,
      "meta": {...},                       # caller-defined, JSON-serializable
      "params": {
        "<name>": {"group": "e|s|l", "shape": [d0, d1, ...], "values": [...]}
      }
    }

``values`` is the row-major flattening. Floats are written with ``repr``
precision, so a save/load round trip is bit-exact for float64.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "rstparse-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params, meta: dict | None = None) -> None:
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "meta": meta or {},
        "params": {
            name: {
                "group": params.group_of(name),
                "shape": list(t.shape),
                "values": t.data.reshape(-1).tolist(),
            }
            for name, t in params.items()
        },
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str], dict]:
    """Return ``(arrays by name, group by name, meta)``."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a JSON checkpoint ({exc})") from None
    if payload.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unknown checkpoint format {payload.get('format')!r}")
    if payload.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {payload.get('version')!r}")
    arrays, groups = {}, {}
    for name, entry in payload["params"].items():
        values = np.asarray(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if values.size != int(np.prod(shape)):
            raise CheckpointError(f"{path}: {name} has {values.size} values for shape {shape}")
        arrays[name] = values.reshape(shape)
        groups[name] = entry["group"]
    return arrays, groups, payload.get("meta", {})
