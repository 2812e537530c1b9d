"""Hinge-loss classification of matrix-valued examples with a nuclear-norm bound.

``max_{||sigma(x)||_1 <= R} min_{y in Y} <x, N^{-1} sum_j y_j eps_j z_j> - N^{-1} sum_j y_j``
over ``Y = {0 <= y <= 1, sum_j eps_j y_j = 0}``; the hyperplane absorbs the bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import PrimalPoint
from ..duality import FenchelProblem
from ..lo import NuclearBallLO
from ..prox import BoxHyperplane


@dataclass
class SvmInstance:
    z: np.ndarray  # (N, p, q)
    labels: np.ndarray  # (N,) in {-1, +1}
    radius: float = 10.0
    seed: int | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if self.z.ndim != 3 or self.z.shape[0] != self.labels.size:
            raise ValueError("z must be (N, p, q) with one label per example")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be +-1")
        if not (np.any(self.labels > 0) and np.any(self.labels < 0)):
            raise ValueError("both classes must be present")
        norms = np.linalg.norm(self.z, ord=2, axis=(1, 2))
        if norms.max() > 1.0 + 1e-12:
            raise ValueError("examples must have spectral norm <= 1")

    @property
    def N(self) -> int:
        return self.labels.size

    def params(self) -> dict:
        return {"app": "svm", "N": self.N, "p": self.z.shape[1], "q": self.z.shape[2], "R": self.radius,
                "seed": self.seed}


def normalize_examples(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    s = np.linalg.norm(z, ord=2, axis=(1, 2))
    return z / np.maximum(s, 1.0)[:, None, None]


def gen_svm(N: int, p: int, q: int, radius: float = 10.0, rank: int = 1, seed: int = 0) -> SvmInstance:
    """Examples labelled by a random low-rank classifier; both classes forced to be present."""
    rng = np.random.default_rng(seed)
    z = normalize_examples(rng.standard_normal((N, p, q)) / np.sqrt(max(p, q)))
    w = rng.standard_normal((p, rank)) @ rng.standard_normal((rank, q))
    labels = np.where(np.einsum("npq,pq->n", z, w) >= 0, 1.0, -1.0)
    if labels.min() == labels.max():
        labels[: N // 2] *= -1.0
    return SvmInstance(z, labels, radius, seed)


def build_svm(inst: SvmInstance) -> FenchelProblem:
    N = inst.N
    ez = inst.labels[:, None, None] * inst.z
    Y = BoxHyperplane(inst.labels)
    X = NuclearBallLO(inst.z.shape[1], inst.z.shape[2], inst.radius)
    c = np.full(N, -1.0 / N)

    def apply_A(y):
        return np.tensordot(y, ez, axes=1) / N

    def adjoint(x: PrimalPoint):
        if x.is_factored:
            return np.einsum("k,kp,npq,kq->n", x.weights, x.left, ez, x.right) / N
        return np.einsum("npq,pq->n", ez, x.materialize()) / N

    def primal(x: PrimalPoint) -> float:
        val, _ = Y.support(-(adjoint(x) + c))
        return -val

    R = inst.radius
    lf = 2.0 * R / np.sqrt(N) if R >= 1.0 else (R + 1.0) / np.sqrt(N)
    return FenchelProblem(Y=Y, X=X, apply_A=apply_A, adjoint=adjoint, primal_value=primal, c=c,
                          Lf_bound=float(lf), name="svm")


def hinge_risk(inst: SvmInstance, x: np.ndarray, b: float) -> float:
    """``N^{-1} sum_j [1 - eps_j (<x, z_j> + b)]_+``."""
    s = np.einsum("npq,pq->n", inst.z, x)
    return float(np.mean(np.maximum(1.0 - inst.labels * (s + b), 0.0)))
