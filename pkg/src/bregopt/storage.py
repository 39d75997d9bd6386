"""Plain-text matrix container and instance files.

A matrix file is a comment line, a ``rows cols`` header, then one line per
row of round-trippable doubles. An instance is a matrix file ``<stem>.txt``
plus ``<stem>.json`` holding ``lambda``, ``rank``, ``symmetric``, ``seed`` and
``scaling``.
"""

import json
import os

import numpy as np

from .objectives import MatrixPcaInstance

__all__ = ["save_matrix", "load_matrix", "save_instance", "load_instance"]

_MAGIC = "# bregopt matrix v1"


def save_matrix(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    with open(path, "w") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_matrix(path):
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError as err:
        raise ValueError(f"{path}: bad header {lines[0].strip()!r}") from err
    data = np.array([float(t) for ln in lines[1:] for t in ln.split()])
    if data.size != rows * cols:
        raise ValueError(f"{path}: header says {rows}x{cols}, found {data.size} values")
    return data.reshape(rows, cols)


def _stem(path):
    root, ext = os.path.splitext(os.fspath(path))
    return root if ext in (".txt", ".json") else os.fspath(path)


def save_instance(path, inst):
    """Write ``<stem>.txt`` and ``<stem>.json``; returns the stem."""
    stem = _stem(path)
    save_matrix(stem + ".txt", inst.A)
    with open(stem + ".json", "w") as fh:
        json.dump(inst.metadata(), fh, indent=2, sort_keys=True)
    return stem


def load_instance(path):
    stem = _stem(path)
    A = load_matrix(stem + ".txt")
    with open(stem + ".json") as fh:
        meta = json.load(fh)
    missing = {"lambda", "rank", "symmetric"} - set(meta)
    if missing:
        raise ValueError(f"{stem}.json is missing {sorted(missing)}")
    return MatrixPcaInstance(A, float(meta["lambda"]), int(meta["rank"]),
                             bool(meta["symmetric"]), meta.get("seed"),
                             float(meta.get("scaling", 1.0)))
