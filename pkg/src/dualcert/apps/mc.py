"""Matrix completion with uniform fit on a labelled cell pattern.

Primal: ``max_{||sigma(x)||_1 <= R} -||P(x - a)||_inf`` where ``(P x)_i`` sums
``x`` over the cells carrying label ``i``.  Dual over the unit l1 ball:
``f(y) = R sigma_max(P^* y) - <P a, y>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..core import PrimalPoint
from ..duality import FenchelProblem
from ..lo import NuclearBallLO
from ..prox import L1Ball

MAX_RESAMPLES = 1000


@dataclass
class McInstance:
    p: int
    r: int
    N: int
    d: int
    seed: int
    rows: np.ndarray
    cols: np.ndarray
    labels: np.ndarray
    w: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def P(self, x: PrimalPoint) -> np.ndarray:
        vals = x.entries(self.rows, self.cols)
        return np.bincount(self.labels, weights=vals, minlength=self.N)

    def P_dense(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.labels, weights=x[self.rows, self.cols], minlength=self.N)

    def P_adj(self, y) -> sp.csr_matrix:
        y = np.asarray(y, dtype=float)
        return sp.csr_matrix((y[self.labels], (self.rows, self.cols)), shape=(self.p, self.p))

    def params(self) -> dict:
        return {"app": "mc", "p": self.p, "r": self.r, "N": self.N, "d": self.d, "seed": self.seed}


def _cell_pattern(p: int, r: int, rng: np.random.Generator):
    """Union of ``r`` pairwise disjoint random permutation matrices."""
    perms: list[np.ndarray] = []
    taken = np.zeros((p, p), dtype=bool)
    for _ in range(r):
        for _attempt in range(MAX_RESAMPLES):
            perm = rng.permutation(p)
            if not taken[np.arange(p), perm].any():
                break
        else:
            raise ValueError(f"could not draw {r} disjoint permutations of size {p}")
        taken[np.arange(p), perm] = True
        perms.append(perm)
    rows = np.tile(np.arange(p), r)
    cols = np.concatenate(perms)
    return rows, cols


def gen_mc(p: int, r: int, N: int, d: int = 32, seed: int = 0) -> McInstance:
    """Random instance: every row and column holds ``r`` cells, each label marks ``pr/N`` of them."""
    if p < 1 or r < 1 or N < 1:
        raise ValueError("p, r, N must be positive")
    if r > p:
        raise ValueError("r cannot exceed p")
    if (p * r) % N:
        raise ValueError(f"N={N} must divide p*r={p * r}")
    d = min(d, N) if d is not None else min(32, N)
    if d < 1:
        raise ValueError("d must be positive")
    s_cells, s_labels, s_w, s_noise = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4))
    rows, cols = _cell_pattern(p, r, s_cells)
    labels = s_labels.permutation(np.repeat(np.arange(N), p * r // N))
    w = np.zeros(N)
    support = s_w.choice(N, size=d, replace=False)
    w[support] = s_w.standard_normal(d)
    inst = McInstance(p, r, N, d, seed, rows, cols, labels, w, np.zeros((p, p)), np.zeros((p, p)))
    pw = inst.P_adj(w).toarray()
    v = pw / np.linalg.svd(pw, compute_uv=False).sum()
    a = v + 2.0 * np.abs(v).max() * np.clip(s_noise.standard_normal((p, p)), -1.0, 1.0)
    inst.v, inst.a = v, a
    return inst


def build_mc_dual(inst: McInstance, radius: float = 1.0, lo_kw: dict | None = None, dgf: str = "euclidean") -> FenchelProblem:
    Pa = inst.P_dense(inst.a)
    Y = L1Ball(inst.N, dgf=dgf)
    X = NuclearBallLO(inst.p, inst.p, radius, **(lo_kw or {}))
    lf = np.sqrt(inst.p * inst.r / inst.N) * radius
    lf = lf + (np.linalg.norm(Pa) if dgf == "euclidean" else np.abs(Pa).max())

    def primal(x: PrimalPoint) -> float:
        return -float(np.abs(inst.P(x) - Pa).max())

    return FenchelProblem(Y=Y, X=X, apply_A=inst.P_adj, adjoint=inst.P, primal_value=primal, c=-Pa,
                          Lf_bound=float(lf), name="mc")
