"""JSON and CSV file formats used by the command line.

Forest file: a JSON list of trees, each
``{"parents": [null, 0, 0, ...], "kind": "scalar" | "categorical", "observations": [...]}``.

Model file: ``{"N": ..., "pi": [...], "transitions": {"2": [[flat row per parent state], ...]},
"emission": {"type": "categorical", "probs": [[...]]}}`` or
``{"type": "gaussian", "mean": [...], "std": [...]}``. Child tuples in a
flat row are ordered lexicographically.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .errors import KindMismatch
from .model import Categorical, HmtModel
from .tree import CATEGORICAL, SCALAR, Forest, build_tree


def forest_to_json(forest: Forest) -> list:
    out = []
    for t, o in forest:
        obs = o.tolist()
        out.append({"parents": list(t.parent), "kind": forest.kind, "observations": obs})
    return out


def forest_from_json(data) -> Forest:
    if not isinstance(data, list) or not data:
        raise ValueError("forest file must hold a non-empty JSON list of trees")
    kinds = {tree.get("kind", SCALAR) for tree in data}
    if len(kinds) != 1:
        raise KindMismatch(f"trees mix observation kinds {sorted(kinds)}")
    kind = kinds.pop()
    if kind not in (SCALAR, CATEGORICAL):
        raise ValueError(f"unknown observation kind {kind!r}")
    trees, obs = [], []
    for k, tree in enumerate(data):
        try:
            trees.append(build_tree(tree["parents"]))
            obs.append(np.asarray(tree["observations"], dtype=np.float64))
        except KeyError as e:
            raise ValueError(f"tree {k} is missing key {e}") from None
    return Forest(tuple(trees), tuple(obs), kind)


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def read_forest(path) -> Forest:
    return forest_from_json(json.loads(Path(path).read_text()))


def write_forest(forest: Forest, path) -> None:
    dump_json(forest_to_json(forest), path)


def read_model(path) -> HmtModel:
    return HmtModel.from_dict(json.loads(Path(path).read_text()))


def write_model(model: HmtModel, path) -> None:
    dump_json(model.to_dict(), path)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def model_parameters(model: HmtModel) -> list:
    """Flat ``(name, value)`` listing of every parameter, in a fixed order."""
    N = model.state_count
    out = [(f"pi[{k}]", float(p)) for k, p in enumerate(model.pi)]
    for n, a in model.transitions.items():
        for idx in np.ndindex(a.shape):
            out.append((f"a{n}[{idx[0]};{','.join(map(str, idx[1:]))}]", float(a[idx])))
    em = model.emission
    if isinstance(em, Categorical):
        for mu in range(N):
            out.extend((f"b[{mu},{v}]", float(p)) for v, p in enumerate(em.probs[mu]))
    else:
        out.extend((f"mean[{mu}]", float(v)) for mu, v in enumerate(em.mean))
        out.extend((f"std[{mu}]", float(v)) for mu, v in enumerate(em.std))
    return out


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def fmt(x: float) -> str:
    """Round-trippable float text; ``nan`` and ``-inf`` spelled out."""
    return repr(float(x))
