"""Instance files and CSV ingestion.

An instance file is one JSON header line followed by raw array payloads::

    {"app": "mc", "arrays": [{"name": "a", "dtype": "<f8", "shape": [64, 64]}, ...], "params": {...}}\\n
    <bytes of a><bytes of b>...

Payloads are little-endian and column-major (Fortran order), in header order.
The header is written with sorted keys so identical instances give identical bytes.

CSV datasets (SVM and multiclass) have one example per row, label first, then
the features.  SVM labels are +-1 and features are ``p*q`` entries of the
example matrix in row-major order; multiclass labels are integers ``1..M``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mc import McInstance
from .multiclass import MulticlassInstance, normalize_features
from .psd import PsdCompletionInstance
from .svm import SvmInstance, normalize_examples

FORMAT_VERSION = 1


def _arrays_of(inst) -> tuple[str, dict, dict]:
    if isinstance(inst, McInstance):
        arrs = {"rows": inst.rows, "cols": inst.cols, "labels": inst.labels, "w": inst.w, "v": inst.v, "a": inst.a}
        return "mc", inst.params(), arrs
    if isinstance(inst, PsdCompletionInstance):
        return "psd", inst.params(), {"b": inst.b}
    if isinstance(inst, SvmInstance):
        return "svm", inst.params(), {"z": inst.z, "labels": inst.labels}
    if isinstance(inst, MulticlassInstance):
        return "multiclass", inst.params(), {"z": inst.z, "labels": inst.labels}
    raise TypeError(f"unsupported instance type {type(inst).__name__}")


def _le(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    kind = "<i8" if a.dtype.kind in "iu" else "<f8"
    return a.astype(kind)


def dumps_instance(inst) -> bytes:
    app, params, arrs = _arrays_of(inst)
    meta, chunks = [], []
    for name, arr in arrs.items():
        arr = _le(arr)
        meta.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        chunks.append(arr.tobytes(order="F"))
    header = {"app": app, "version": FORMAT_VERSION, "params": params, "arrays": meta}
    return json.dumps(header, sort_keys=True).encode() + b"\n" + b"".join(chunks)


def save_instance(inst, path) -> Path:
    path = Path(path)
    path.write_bytes(dumps_instance(inst))
    return path


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return json.loads(fh.readline())


def loads_instance(data: bytes):
    nl = data.index(b"\n")
    header = json.loads(data[:nl])
    pos = nl + 1
    arrs = {}
    for m in header["arrays"]:
        dt = np.dtype(m["dtype"])
        n = int(np.prod(m["shape"], dtype=np.int64)) * dt.itemsize
        if pos + n > len(data):
            raise ValueError(f"truncated payload for array {m['name']!r}")
        arrs[m["name"]] = np.frombuffer(data[pos:pos + n], dtype=dt).reshape(m["shape"], order="F").copy()
        pos += n
    if pos != len(data):
        raise ValueError("trailing bytes after the declared payloads")
    app, p = header["app"], header["params"]
    if app == "mc":
        return McInstance(p["p"], p["r"], p["N"], p["d"], p["seed"], arrs["rows"], arrs["cols"],
                          arrs["labels"], arrs["w"], arrs["v"], arrs["a"])
    if app == "psd":
        return PsdCompletionInstance(arrs["b"], p["R"], p.get("seed"))
    if app == "svm":
        return SvmInstance(arrs["z"], arrs["labels"], p["R"], p.get("seed"))
    if app == "multiclass":
        return MulticlassInstance(arrs["z"], arrs["labels"], p["M"], p["R"], p.get("seed"))
    raise ValueError(f"unknown app {app!r}")


def load_instance(path):
    return loads_instance(Path(path).read_bytes())


def _read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("CSV needs a label column and at least one feature column")
    return data[:, 0], data[:, 1:]


def svm_from_csv(path, p: int, q: int, radius: float = 10.0, normalize: bool = True) -> SvmInstance:
    """Rows ``label, z_11, z_12, ..., z_pq``; examples with spectral norm above 1 are scaled down."""
    labels, feats = _read_csv(path)
    if feats.shape[1] != p * q:
        raise ValueError(f"expected {p * q} feature columns, got {feats.shape[1]}")
    z = feats.reshape(-1, p, q)
    return SvmInstance(normalize_examples(z) if normalize else z, labels, radius)


def multiclass_from_csv(path, M: int | None = None, radius: float = 10.0, normalize: bool = True) -> MulticlassInstance:
    """Rows ``label, z_1, ..., z_q`` with labels in ``1..M``; rows with norm above 1 are scaled down."""
    labels, feats = _read_csv(path)
    if not np.all(labels == np.round(labels)):
        raise ValueError("multiclass labels must be integers")
    labels = labels.astype(int)
    if labels.min() < 1:
        raise ValueError("multiclass labels must start at 1")
    M = int(labels.max()) if M is None else M
    return MulticlassInstance(normalize_features(feats) if normalize else feats, labels - 1, M, radius)
