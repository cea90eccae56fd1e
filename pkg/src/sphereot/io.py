"""JSON / CSV serialisation with 17-significant-digit floats.

The stdlib encoder writes shortest round-trip reprs; reports here must carry
exactly ``%.17g`` so they are byte-stable and diff-able, hence the small
hand-rolled writer.  Non-finite floats are written as ``null``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import NodeSetMismatch, ValidationError
from .fields import DensityField, NodeSet, nodes_from_arrays
from .transport import DiscreteMap, Potentials, TransportPlan


def fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj, indent=1, _level=0) -> str:
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric rows stay on one line
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


# --------------------------------------------------------------------------
# node sets and fields
# --------------------------------------------------------------------------

def nodes_to_dict(nodes: NodeSet, values=None):
    return {
        "n": nodes.n,
        "N": nodes.N,
        "scheme": nodes.scheme,
        "seed": nodes.seed,
        "k_neighbors": nodes.k_neighbors,
        "h": nodes.h,
        "points": nodes.points,
        "weights": nodes.weights,
        "values": [] if values is None else np.asarray(values, dtype=float),
    }


def nodes_from_dict(d) -> NodeSet:
    try:
        return nodes_from_arrays(int(d["n"]), d["points"], d["weights"], d["scheme"],
                                 int(d["seed"]), int(d.get("k_neighbors", 12)))
    except KeyError as exc:
        raise ValidationError(f"node file lacks key {exc}") from None


def density_from_dict(d, alpha=0.5) -> DensityField:
    return DensityField(values=np.asarray(d["values"], dtype=float), alpha=alpha)


# --------------------------------------------------------------------------
# plans, potentials, maps
# --------------------------------------------------------------------------

def plan_to_dict(plan: TransportPlan):
    return {"coupling": plan.coupling, "row_error": plan.row_error, "col_error": plan.col_error}


def potentials_to_dict(pot: Potentials):
    return {"u": pot.u, "v": pot.v, "eps": pot.eps, "iterations": pot.iterations}


def map_to_dict(T: DiscreteMap):
    d = nodes_to_dict(T.source)
    del d["values"]
    d["images"] = T.images
    d["provenance"] = T.provenance
    return d


def map_from_dict(d, nodes: NodeSet | None = None) -> DiscreteMap:
    src = nodes_from_dict(d)
    if nodes is not None:
        if not nodes.same_nodes(src):
            raise NodeSetMismatch("map was computed on a different node set")
        src = nodes
    images = np.asarray(d["images"], dtype=float)
    if images.shape != src.points.shape:
        raise ValidationError("map images do not match the node set")
    return DiscreteMap(images=images, source=src, provenance=d.get("provenance", "barycentric"))


def write_map_csv(path, T: DiscreteMap):
    """Columns: node, source coords, image coords, displacement."""
    d = T.source.points.shape[1]
    header = ["node"] + [f"x{k + 1}" for k in range(d)] + [f"t{k + 1}" for k in range(d)] + ["displacement"]
    disp = T.displacement
    rows = [[str(i)] + [fmt(v) for v in T.source.points[i]] + [fmt(v) for v in T.images[i]] + [fmt(disp[i])]
            for i in range(T.source.N)]
    return write_csv(path, header, rows)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=",", lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in r])
    return path
