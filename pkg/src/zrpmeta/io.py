"""File formats: graph and model specs, capacity records, atomic report writing."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .graph import SiteGraph, build_graph, complete, ring
from .model import ZrpModel


def resolve_graph(ref) -> SiteGraph:
    """Graph from ``"complete:k"``, ``"ring:k"``, a JSON file path or an inline spec dict."""
    if isinstance(ref, SiteGraph):
        return ref
    if isinstance(ref, Mapping):
        return build_graph(ref)
    ref = str(ref)
    kind, _, arg = ref.partition(":")
    if kind in ("complete", "ring") and arg.isdigit():
        return (complete if kind == "complete" else ring)(int(arg))
    with open(ref) as fh:
        return build_graph(json.load(fh))


def load_model(path) -> ZrpModel:
    """Model spec file: ``{"alpha": ..., "graph": <graph reference or spec>}``."""
    with open(path) as fh:
        spec = json.load(fh)
    return ZrpModel(float(spec["alpha"]), resolve_graph(spec["graph"]))


def capacity_record(N: int, model: ZrpModel, A, B, cap: float, residual: float, seconds: float) -> dict:
    return {"N": int(N), "alpha": float(model.alpha), "graph_hash": model.graph.digest(),
            "A": [int(i) for i in np.asarray(A)], "B": [int(i) for i in np.asarray(B)],
            "cap": float(cap), "residual": float(residual), "seconds": float(seconds)}


def _to_builtin(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return _atomic_write(path, json.dumps(obj, indent=2, default=_to_builtin, allow_nan=True) + "\n")


def write_csv(path, rows: Iterable[Mapping]) -> Path:
    rows = list(rows)
    fields: list[str] = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _to_builtin(v) if isinstance(v, (np.generic, np.ndarray)) else v
                         for k, v in r.items()})
    return _atomic_write(path, buf.getvalue())


def harmonic_to_csv(path, table, values) -> Path:
    """One row per configuration: rank, occupations, mu_N weight and h."""
    counts = table.space.counts
    rows = ({"rank": i, **{f"n{s}": int(c) for s, c in zip(table.space.sites, counts[i])},
             "weight": float(table.weights[i]), "h": float(values[i])} for i in range(len(counts)))
    return write_csv(path, rows)
