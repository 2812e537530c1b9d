"""Multi-class hinge-loss classification with rows of ``x`` bounded in l2.

``f_*(x) = -N^{-1} sum_j max_i [z_j^T (x^i - x^{i(j)}) + 1{i != i(j)}]`` over
``X = {x in R^{M x q} : ||x^i||_2 <= R}``, represented with ``y`` in a product
of ``N`` simplices of mass ``1/N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import PrimalPoint
from ..duality import FenchelProblem
from ..lo import InfTwoBoxLO
from ..prox import SimplexProduct


@dataclass
class MulticlassInstance:
    z: np.ndarray  # (N, q)
    labels: np.ndarray  # (N,) in 0..M-1
    M: int
    radius: float = 10.0
    seed: int | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if self.z.ndim != 2 or self.z.shape[0] != self.labels.size:
            raise ValueError("z must be (N, q) with one label per example")
        if self.labels.min() < 0 or self.labels.max() >= self.M:
            raise ValueError("labels must lie in [0, M)")
        if np.linalg.norm(self.z, axis=1).max() > 1.0 + 1e-12:
            raise ValueError("feature vectors must have l2 norm <= 1")

    @property
    def N(self) -> int:
        return self.labels.size

    @property
    def q(self) -> int:
        return self.z.shape[1]

    def onehot(self) -> np.ndarray:
        chi = np.zeros((self.N, self.M))
        chi[np.arange(self.N), self.labels] = 1.0
        return chi

    def params(self) -> dict:
        return {"app": "multiclass", "N": self.N, "q": self.q, "M": self.M, "R": self.radius, "seed": self.seed}


def normalize_features(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return z / np.maximum(np.linalg.norm(z, axis=1), 1.0)[:, None]


def gen_multiclass(N: int, q: int, M: int, radius: float = 10.0, seed: int = 0) -> MulticlassInstance:
    """Features on the unit sphere labelled by the argmax of a random linear score."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((N, q))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    w = rng.standard_normal((M, q))
    labels = np.argmax(z @ w.T, axis=1)
    return MulticlassInstance(z, labels, M, radius, seed)


def build_multiclass(inst: MulticlassInstance) -> FenchelProblem:
    N, M, q = inst.N, inst.M, inst.q
    z, lab = inst.z, inst.labels
    chi = inst.onehot()
    Y = SimplexProduct(N, M)
    X = InfTwoBoxLO(M, q, inst.radius)

    def B(x: PrimalPoint) -> np.ndarray:
        # (Bx)^j_i = z_j^T (x^{i(j)} - x^i)
        s = z @ x.materialize().T  # (N, M): z_j^T x^i
        return s[np.arange(N), lab][:, None] - s

    def apply_A(y):
        # adjoint of B: (A y)^k = sum_j z_j (1{i(j)=k} sum_i y^j_i - y^j_k)
        y = np.asarray(y, dtype=float).reshape(N, M)
        coef = chi * y.sum(axis=1, keepdims=True) - y
        return coef.T @ z

    def primal(x: PrimalPoint) -> float:
        s = z @ x.materialize().T
        margins = s - s[np.arange(N), lab][:, None] + (1.0 - chi)
        return -float(margins.max(axis=1).mean())

    return FenchelProblem(Y=Y, X=X, apply_A=apply_A, adjoint=B, primal_value=primal, c=-(1.0 - chi),
                          Lf_bound=2.0 * inst.radius + 1.0, name="multiclass")
