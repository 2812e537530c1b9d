"""Best entrywise approximation of a symmetric matrix by a PSD matrix of fixed trace.

``max {-||x - b||_inf : x psd, Tr x = R}`` with the representation
``-||x - b||_inf = min_{||y||_1 <= 1} <b - x, y>`` over symmetric ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import PrimalPoint
from ..duality import FenchelProblem
from ..lo import SpectrahedronLO
from ..prox import L1Ball


@dataclass
class PsdCompletionInstance:
    b: np.ndarray
    radius: float
    seed: int | None = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if self.b.ndim != 2 or self.b.shape[0] != self.b.shape[1]:
            raise ValueError("b must be square")
        if np.abs(self.b - self.b.T).max(initial=0.0) > 1e-12:
            raise ValueError("b must be symmetric")
        if not self.radius > 0:
            raise ValueError("R must be positive")

    @property
    def p(self) -> int:
        return self.b.shape[0]

    def params(self) -> dict:
        return {"app": "psd", "p": self.p, "R": self.radius, "seed": self.seed}


def gen_psd(p: int, radius: float = 1.0, seed: int = 0) -> PsdCompletionInstance:
    """Symmetric Gaussian target scaled so that its entries are comparable to those of ``X``."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((p, p))
    b = (g + g.T) * (radius / (2.0 * p))
    return PsdCompletionInstance(b, radius, seed)


def build_psd_completion(inst: PsdCompletionInstance, dgf: str = "power", sparsify_eps: float | None = None,
                         lo_kw: dict | None = None) -> FenchelProblem:
    p = inst.p
    Y = L1Ball((p, p), dgf=dgf, symmetric=True)
    X = SpectrahedronLO(p, inst.radius, sparsify_eps=sparsify_eps, **(lo_kw or {}))
    b = inst.b
    # dual norm of b - x: sup-norm for the l1 setup, Frobenius for the Euclidean one
    lf = inst.radius + (np.abs(b).max() if dgf == "power" else np.linalg.norm(b))

    def primal(x: PrimalPoint) -> float:
        return -float(np.abs(x.materialize() - b).max())

    return FenchelProblem(Y=Y, X=X, apply_A=lambda y: -y, adjoint=lambda x: -x.materialize(), primal_value=primal,
                          c=b.copy(), Lf_bound=float(lf), name="psd")
