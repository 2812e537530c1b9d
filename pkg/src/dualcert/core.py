"""Execution protocols, accuracy certificates and primal recovery.

A first-order method run on the dual problem leaves behind a protocol of
search points ``y_t`` together with the oracle answers ``g_t = f'(y_t)`` and
the primal points ``x_t`` the LO oracle produced while computing them.  Any
convex combination ``lam`` of the steps is an accuracy certificate; its
resolution

    eps(lam) = max_{y in Y} sum_t lam_t <g_t, y_t - y>

bounds the duality gap of the averaged pair ``(sum lam_t x_t, sum lam_t y_t)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

MEMBERSHIP_TOL = 1e-9
CERT_SUM_TOL = 1e-12


def inner(a, b) -> float:
    """Frobenius inner product of two real arrays of the same size."""
    return float(np.vdot(np.asarray(a), np.asarray(b)))


class PrimalPoint:
    """A point of the primal space, dense or as a weighted sum of rank-1 terms.

    The factored form ``sum_k w_k u_k v_k^T`` is what LO oracles over nuclear
    balls and spectrahedra return, and averaging such points keeps it factored.
    """

    __slots__ = ("_dense", "weights", "left", "right")

    def __init__(self, dense=None, weights=None, left=None, right=None):
        if dense is None and weights is None:
            raise ValueError("PrimalPoint needs either a dense array or factors")
        if dense is not None and weights is not None:
            raise ValueError("PrimalPoint is either dense or factored, not both")
        if dense is not None:
            self._dense = np.asarray(dense, dtype=float)
            self.weights = self.left = self.right = None
        else:
            self._dense = None
            self.weights = np.atleast_1d(np.asarray(weights, dtype=float))
            self.left = np.atleast_2d(np.asarray(left, dtype=float))
            self.right = np.atleast_2d(np.asarray(right, dtype=float))
            k = self.weights.shape[0]
            if self.left.shape[0] != k or self.right.shape[0] != k:
                raise ValueError("factor count mismatch")

    @classmethod
    def rank_one(cls, weight: float, u, v) -> "PrimalPoint":
        return cls(weights=[weight], left=np.asarray(u)[None, :], right=np.asarray(v)[None, :])

    @property
    def is_factored(self) -> bool:
        return self._dense is None

    @property
    def shape(self) -> tuple:
        if self._dense is not None:
            return self._dense.shape
        return (self.left.shape[1], self.right.shape[1])

    def materialize(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense
        return (self.left.T * self.weights) @ self.right

    def inner(self, xi) -> float:
        """<x, xi>; ``xi`` may be a dense array or a scipy sparse matrix."""
        if self._dense is not None:
            if hasattr(xi, "multiply") and not isinstance(xi, np.ndarray):
                return float(xi.multiply(self._dense).sum())
            return inner(self._dense, xi)
        # u^T xi v for each factor
        xv = xi @ self.right.T
        return float(np.sum(self.weights * np.einsum("kp,pk->k", self.left, np.asarray(xv))))

    def entries(self, rows, cols) -> np.ndarray:
        """Entries ``x[rows[i], cols[i]]`` without materializing a factored point."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        if self._dense is not None:
            return self._dense[rows, cols]
        return np.einsum("k,ki,ki->i", self.weights, self.left[:, rows], self.right[:, cols])

    def rank(self) -> int:
        if self._dense is not None:
            return int(np.linalg.matrix_rank(self._dense)) if self._dense.ndim == 2 else 1
        return int(np.count_nonzero(self.weights))

    def scaled(self, c: float) -> "PrimalPoint":
        if self._dense is not None:
            return PrimalPoint(dense=c * self._dense)
        return PrimalPoint(weights=c * self.weights, left=self.left, right=self.right)

    @staticmethod
    def combine(points: Sequence["PrimalPoint"], weights) -> "PrimalPoint":
        """Weighted sum ``sum_i weights[i] * points[i]``, dropping zero weights."""
        weights = np.asarray(weights, dtype=float)
        if len(points) != weights.shape[0]:
            raise ValueError("points/weights length mismatch")
        keep = [i for i in range(len(points)) if weights[i] != 0.0]
        if not keep:
            keep = [0]
        pts = [points[i] for i in keep]
        w = weights[keep]
        if all(p.is_factored for p in pts):
            return PrimalPoint(
                weights=np.concatenate([wi * p.weights for wi, p in zip(w, pts)]),
                left=np.concatenate([p.left for p in pts]),
                right=np.concatenate([p.right for p in pts]),
            )
        acc = np.zeros(pts[0].shape)
        for wi, p in zip(w, pts):
            acc = acc + wi * p.materialize()
        return PrimalPoint(dense=acc)

    def __repr__(self) -> str:
        if self._dense is not None:
            return f"PrimalPoint(dense shape={self._dense.shape})"
        return f"PrimalPoint(factored rank<={self.weights.shape[0]}, shape={self.shape})"


@dataclass
class ProtocolStep:
    y: np.ndarray
    g: np.ndarray
    x: PrimalPoint | None = None
    dual_norm: float = 0.0
    delta: float = 0.0


class ExecutionProtocol:
    """Ordered record of ``(y_t, g_t, x_t)`` produced by a dual first-order run."""

    def __init__(self, setup=None):
        self.setup = setup
        self.steps: list[ProtocolStep] = []

    def append(self, y, g, x=None, delta: float = 0.0) -> int:
        y = np.asarray(y, dtype=float)
        g = np.asarray(g, dtype=float)
        if self.setup is not None:
            if y.shape != self.setup.shape or g.shape != self.setup.shape:
                raise ValueError(f"protocol step shape {y.shape} does not match {self.setup.shape}")
            if not self.setup.contains(y, MEMBERSHIP_TOL):
                raise ValueError("protocol search point lies outside Y")
            dn = self.setup.dual_norm(g)
        else:
            dn = float(np.linalg.norm(g.ravel()))
        self.steps.append(ProtocolStep(y=y, g=g, x=x, dual_norm=dn, delta=float(delta)))
        return len(self.steps) - 1

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, i) -> ProtocolStep:
        return self.steps[i]

    def prefix(self, t: int) -> "ExecutionProtocol":
        out = ExecutionProtocol(self.setup)
        out.steps = self.steps[:t]
        return out

    @property
    def ys(self) -> np.ndarray:
        return np.stack([s.y for s in self.steps])

    @property
    def gs(self) -> np.ndarray:
        return np.stack([s.g for s in self.steps])

    def max_delta(self, weights=None) -> float:
        if weights is None:
            return max((s.delta for s in self.steps), default=0.0)
        return max((s.delta for s, w in zip(self.steps, weights) if w > 0), default=0.0)


class AccuracyCertificate:
    """Simplex weights over the steps of a protocol."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("empty certificate")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("certificate weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > CERT_SUM_TOL:
            raise ValueError(f"certificate weights sum to {w.sum():.17g}, not 1")
        self.weights = w

    @classmethod
    def normalized(cls, weights) -> "AccuracyCertificate":
        w = np.clip(np.asarray(weights, dtype=float).ravel(), 0.0, None)
        s = w.sum()
        if not s > 0:
            raise ValueError("cannot normalize an all-zero weight vector")
        w = w / s
        # push the rounding residue onto the largest weight
        w[np.argmax(w)] += 1.0 - w.sum()
        return cls(w)

    @classmethod
    def one_hot(cls, t: int, index: int) -> "AccuracyCertificate":
        w = np.zeros(t)
        w[index] = 1.0
        return cls(w)

    def padded(self, t: int) -> "AccuracyCertificate":
        """Zero-extend to a longer protocol."""
        if t < self.weights.size:
            raise ValueError("cannot pad to a shorter length")
        w = np.zeros(t)
        w[: self.weights.size] = self.weights
        return AccuracyCertificate(w)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def __len__(self) -> int:
        return self.weights.size


def _check_pair(protocol: ExecutionProtocol, cert: AccuracyCertificate):
    if len(protocol) == 0:
        raise ValueError("empty protocol")
    if len(cert) != len(protocol):
        raise ValueError(f"certificate length {len(cert)} != protocol length {len(protocol)}")


def certificate_resolution(protocol: ExecutionProtocol, cert: AccuracyCertificate, setup=None) -> float:
    """Resolution of ``cert`` on ``protocol``.

    Uses ``max_y sum lam <g, y_t - y> = sum lam <g_t, y_t> + supp_Y(-sum lam g_t)``.
    """
    _check_pair(protocol, cert)
    setup = setup if setup is not None else protocol.setup
    if setup is None:
        raise ValueError("a proximal setup with a support oracle is required")
    idx = cert.support()
    lam = cert.weights[idx]
    const = 0.0
    gbar = np.zeros(setup.shape)
    for w, i in zip(lam, idx):
        st = protocol.steps[i]
        const += w * inner(st.g, st.y)
        gbar += w * st.g
    value, _ = setup.support(-gbar)
    return const + value


def recover_primal_dual(protocol: ExecutionProtocol, cert: AccuracyCertificate):
    """Return ``(x_hat, y_hat)``: the certificate-weighted averages of the protocol."""
    _check_pair(protocol, cert)
    idx = cert.support()
    lam = cert.weights[idx]
    y_hat = np.zeros_like(protocol.steps[idx[0]].y)
    for w, i in zip(lam, idx):
        y_hat += w * protocol.steps[i].y
    xs = [protocol.steps[i].x for i in idx]
    if any(x is None for x in xs):
        x_hat = None
    else:
        x_hat = PrimalPoint.combine(xs, lam)
    return x_hat, y_hat


@dataclass
class GapRecord:
    step: int
    epsilon: float
    gap: float
    elapsed: float


class GapTrace:
    """Online record of resolutions and their running minimum ``Gap_t``.

    ``best`` holds the candidate attached to the step that last strictly
    improved the gap (a primal point, or a certificate to recover it from).
    """

    HEADER = ("step", "epsilon", "gap", "elapsed_sec")

    def __init__(self):
        self.records: list[GapRecord] = []
        self.best: Any = None
        self.best_step: int | None = None

    @property
    def gap(self) -> float:
        return self.records[-1].gap if self.records else math.inf

    def update(self, step: int, epsilon: float, candidate=None, elapsed: float = 0.0) -> "GapTrace":
        if not math.isfinite(epsilon):
            raise ValueError("resolution must be finite")
        prev = self.gap
        if epsilon < prev:
            self.best = candidate
            self.best_step = step
            gap = epsilon
        else:
            gap = prev
        self.records.append(GapRecord(step, float(epsilon), float(gap), float(elapsed)))
        return self

    def __len__(self) -> int:
        return len(self.records)

    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.records])

    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.records])

    def gap_at(self, step: int) -> float:
        """``Gap`` after ``step`` steps (1-based), clamped to the trace length."""
        if not self.records:
            raise ValueError("empty trace")
        i = min(step, len(self.records)) - 1
        return self.records[i].gap

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            for r in self.records:
                w.writerow([r.step, fmt17(r.epsilon), fmt17(r.gap), fmt17(r.elapsed)])

    @classmethod
    def from_csv(cls, path) -> "GapTrace":
        tr = cls()
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if tuple(header) != cls.HEADER:
                raise ValueError(f"unexpected trace header {header}")
            for row in rd:
                tr.records.append(GapRecord(int(row[0]), float(row[1]), float(row[2]), float(row[3])))
        return tr


def gap_update(trace: GapTrace, step: int, epsilon: float, candidate=None, elapsed: float = 0.0) -> GapTrace:
    return trace.update(step, epsilon, candidate, elapsed)


def fmt17(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class RunRecord:
    solver: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    final_gap: float = math.inf
    steps: int = 0
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_json(self, path=None) -> str:
        d = asdict(self)
        text = json.dumps(_jsonable(d), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "RunRecord":
        p = Path(str(text_or_path))
        text = p.read_text() if len(str(text_or_path)) < 4096 and p.exists() else str(text_or_path)
        return cls(**json.loads(text))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj

