"""Linear optimization oracles ``x_X(xi) in Argmax_{x in X} <x, xi>`` for the primal domains.

Spectrahedron and nuclear-ball oracles use power iteration and are therefore
delta-approximate; each answer carries the residual it stopped at so the
caller can audit the achieved accuracy against a dense decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import PrimalPoint

DEFAULT_REL_DELTA = 1e-10
DEFAULT_MAX_ITER = 5000
MIN_ITER = 8
BLOCK_SIZE = 4


@dataclass
class LOResult:
    point: PrimalPoint
    value: float
    delta: float = 0.0
    residual: float = 0.0
    converged: bool = True
    iterations: int = 0


def _is_sparse(a) -> bool:
    return sp.issparse(a)


def _fro(a) -> float:
    if _is_sparse(a):
        return float(np.sqrt(a.multiply(a).sum()))
    return float(np.linalg.norm(a))


def _threshold(xi, radius, delta, rel_delta):
    scale = radius * _fro(xi)
    tol = delta if delta is not None else rel_delta * scale
    return tol, tol / (2.0 * radius)


def _start_block(n, b, rng, v0):
    V = rng.standard_normal((n, b))
    if v0 is not None:
        V[:, 0] = v0
    return np.linalg.qr(V)[0]


def _orth(*blocks) -> np.ndarray:
    return np.linalg.qr(np.hstack(blocks))[0]


def top_eigvec(xi, tol_res: float, max_iter: int = DEFAULT_MAX_ITER, rng=None, v0=None, block: int = BLOCK_SIZE,
               min_iter: int = MIN_ITER):
    """Largest (algebraic) eigenpair of a symmetric matrix by block power iteration.

    Each sweep applies ``xi`` to the block and does Rayleigh-Ritz on
    ``span[V, xi V, V_prev]`` (locally optimal block iteration), keeping the top
    ``block`` Ritz vectors.  This converges much faster than plain shifted
    power iteration when the top of the spectrum is clustered.  A small
    residual only says the Ritz pair is *an* eigenpair, so at least
    ``min_iter`` sweeps run before the residual test may stop the loop,
    unless the search space has grown to the whole space (small ``p``), where
    Rayleigh-Ritz is exact.
    Returns ``(q, v, residual, converged, iters)``.
    """
    p = xi.shape[0]
    rng = np.random.default_rng(0) if rng is None else rng
    b = min(p, block)
    V = _start_block(p, b, rng, v0)
    W = np.asarray(xi @ V)
    V_prev = None
    best = None
    full = b >= p
    for it in range(1, max_iter + 1):
        H = V.T @ W
        w, S = np.linalg.eigh(0.5 * (H + H.T))
        V, W = V @ S[:, ::-1], W @ S[:, ::-1]
        q = float(w[-1])
        v = V[:, 0]
        res = float(np.linalg.norm(W[:, 0] - q * v))
        if best is None or res < best[2]:
            best = (q, v, res)
        if res <= tol_res and (it >= min_iter or full):
            return q, v, res, True, it
        blocks = [V, W] if V_prev is None else [V, W, V_prev]
        Q = _orth(*blocks)
        full = Q.shape[1] >= p
        XQ = np.asarray(xi @ Q)
        Hq = Q.T @ XQ
        _, Sq = np.linalg.eigh(0.5 * (Hq + Hq.T))
        top = Sq[:, ::-1][:, :b]
        V_prev = V
        V, W = Q @ top, XQ @ top
    q, v, res = best
    return q, v, res, False, max_iter


def top_singular(xi, tol_res: float, max_iter: int = DEFAULT_MAX_ITER, rng=None, v0=None, block: int = BLOCK_SIZE,
                 min_iter: int = MIN_ITER):
    """Leading singular triple ``(s, u, v)`` by block power iteration on ``xi^T xi``.

    Same locally optimal Rayleigh-Ritz sweep as :func:`top_eigvec`, with the
    Ritz step done by an SVD of ``xi Q``.  The residual is ``||xi^T u - s v||``.
    """
    p, q = xi.shape
    rng = np.random.default_rng(0) if rng is None else rng
    xt = xi.T
    b = min(p, q, block)
    Q = _start_block(q, b, rng, v0)
    V_prev = None
    best = None
    for it in range(1, max_iter + 1):
        full = Q.shape[1] >= q
        XQ = np.asarray(xi @ Q)
        Ub, sb, Wt = np.linalg.svd(XQ, full_matrices=False)
        s = float(sb[0])
        if s == 0.0:
            break
        V = Q @ Wt[:b].T
        u, v = Ub[:, 0], V[:, 0]
        Z = np.asarray(xt @ Ub[:, :b])
        res = float(np.linalg.norm(Z[:, 0] - s * v))
        if best is None or res < best[3]:
            best = (s, u, v, res)
        if res <= tol_res and (it >= min_iter or full):
            return s, u, v, res, True, it
        blocks = [V, Z] if V_prev is None else [V, Z, V_prev]
        V_prev = V
        Q = _orth(*blocks)
    if best is None:
        e1 = np.zeros(p)
        e1[0] = 1.0
        f1 = np.zeros(q)
        f1[0] = 1.0
        return 0.0, e1, f1, 0.0, True, 0
    s, u, v, res = best
    return s, u, v, res, False, max_iter


def lo_spectrahedron(xi, radius: float, delta: float | None = None, method: str = "power",
                     rel_delta: float = DEFAULT_REL_DELTA, rng=None, v0=None, max_iter: int = DEFAULT_MAX_ITER) -> LOResult:
    """Maximize ``<x, xi>`` over ``{x psd, Tr x = radius}``; answer ``radius * v v^T``."""
    p = xi.shape[0]
    if xi.shape != (p, p):
        raise ValueError("spectrahedron LO needs a square matrix")
    if _fro(xi) == 0.0:
        e1 = np.zeros(p)
        e1[0] = 1.0
        return LOResult(PrimalPoint.rank_one(radius, e1, e1), 0.0)
    if method == "dense":
        dense = xi.toarray() if _is_sparse(xi) else np.asarray(xi)
        w, V = np.linalg.eigh(0.5 * (dense + dense.T))
        j = int(np.flatnonzero(w == w[-1])[0])
        v = V[:, j]
        return LOResult(PrimalPoint.rank_one(radius, v, v), radius * float(w[j]))
    tol, tol_res = _threshold(xi, radius, delta, rel_delta)
    q, v, res, ok, its = top_eigvec(xi, tol_res, max_iter=max_iter, rng=rng, v0=v0)
    return LOResult(PrimalPoint.rank_one(radius, v, v), radius * q, delta=2.0 * radius * res,
                    residual=res, converged=ok, iterations=its)


def lo_nuclear(xi, radius: float, delta: float | None = None, method: str = "power",
               rel_delta: float = DEFAULT_REL_DELTA, rng=None, v0=None, max_iter: int = DEFAULT_MAX_ITER) -> LOResult:
    """Maximize ``<x, xi>`` over ``{x : ||sigma(x)||_1 <= radius}``; answer ``radius * u v^T``."""
    p, q = xi.shape
    if _fro(xi) == 0.0:
        e1 = np.zeros(p)
        e1[0] = 1.0
        f1 = np.zeros(q)
        f1[0] = 1.0
        return LOResult(PrimalPoint.rank_one(radius, e1, f1), 0.0)
    if method == "dense":
        dense = xi.toarray() if _is_sparse(xi) else np.asarray(xi)
        U, s, Vt = np.linalg.svd(dense)
        return LOResult(PrimalPoint.rank_one(radius, U[:, 0], Vt[0]), radius * float(s[0]))
    tol, tol_res = _threshold(xi, radius, delta, rel_delta)
    s, u, v, res, ok, its = top_singular(xi, tol_res, max_iter=max_iter, rng=rng, v0=v0)
    return LOResult(PrimalPoint.rank_one(radius, u, v), radius * s, delta=2.0 * radius * res,
                    residual=res, converged=ok, iterations=its)


def lo_inf2box(xi, radius: float) -> LOResult:
    """Blockwise maximizer over ``{x = [x^1; ...; x^M] : ||x^i||_2 <= radius}``; rows are blocks."""
    xi = np.asarray(xi, dtype=float)
    norms = np.linalg.norm(xi, axis=1)
    x = np.zeros_like(xi)
    nz = norms > 0
    x[nz] = radius * xi[nz] / norms[nz, None]
    return LOResult(PrimalPoint(dense=x), radius * float(norms.sum()))


def sparsify_symmetric(y, radius: float, eps: float):
    """Zero the smallest-magnitude entries of symmetric ``y`` while ``||y - y_eps||_F <= eps / radius``.

    Entries are removed in order of increasing magnitude (off-diagonal pairs
    together, costing twice their square).  Returns ``(y_eps, removed_sq)``.
    """
    y = np.asarray(y, dtype=float)
    p = y.shape[0]
    budget = (eps / radius) ** 2
    iu, ju = np.triu_indices(p)
    vals = y[iu, ju]
    cost = np.where(iu == ju, 1.0, 2.0) * vals**2
    order = np.argsort(np.abs(vals), kind="stable")
    csum = np.cumsum(cost[order])
    k = int(np.searchsorted(csum, budget, side="right"))
    drop = order[:k]
    out = y.copy()
    out[iu[drop], ju[drop]] = 0.0
    out[ju[drop], iu[drop]] = 0.0
    removed = float(csum[k - 1]) if k > 0 else 0.0
    return out, removed


def sparsify_then_lo(y, radius: float, eps: float, **kw) -> LOResult:
    """Spectrahedron LO on a thresholded copy of ``y``; declared suboptimality ``2 eps``."""
    y = np.asarray(y, dtype=float)
    if not radius / eps > 1.0:
        raise ValueError("sparsification needs radius / eps > 1")
    if np.abs(y).sum() > 1.0 + 1e-9:
        raise ValueError("sparsification is calibrated for ||y||_1 <= 1")
    ys, _ = sparsify_symmetric(y, radius, eps)
    res = lo_spectrahedron(sp.csr_matrix(ys), radius, **kw)
    res.delta = res.delta + 2.0 * eps
    return res


class LOOracle:
    """Base class: ``maximize(xi) -> LOResult``."""

    radius: float
    exact_only = False

    def maximize(self, xi, **kw) -> LOResult:
        raise NotImplementedError

    def exact(self) -> "LOOracle":
        """A copy that solves the linear problem by a dense decomposition."""
        return self

    def contains(self, x: PrimalPoint, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "radius": self.radius}


class SpectrahedronLO(LOOracle):
    def __init__(self, p: int, radius: float, delta: float | None = None, method: str = "power",
                 rel_delta: float = DEFAULT_REL_DELTA, seed: int = 0, sparsify_eps: float | None = None,
                 warm_start: bool = True):
        self.p = int(p)
        self.radius = float(radius)
        self.delta = delta
        self.method = method
        self.rel_delta = rel_delta
        self.seed = seed
        self.sparsify_eps = sparsify_eps
        self.warm_start = warm_start
        self._rng = np.random.default_rng(seed)
        self._v = None

    @property
    def shape(self):
        return (self.p, self.p)

    def maximize(self, xi, **kw) -> LOResult:
        if self.sparsify_eps is not None:
            res = sparsify_then_lo(xi, self.radius, self.sparsify_eps, delta=self.delta, method=self.method,
                                   rel_delta=self.rel_delta, rng=self._rng)
        else:
            v0 = self._v if self.warm_start else None
            res = lo_spectrahedron(xi, self.radius, self.delta, self.method, self.rel_delta, rng=self._rng, v0=v0)
        if res.point.is_factored:
            self._v = res.point.left[0]
        return res

    def exact(self):
        return SpectrahedronLO(self.p, self.radius, method="dense")

    def contains(self, x, tol=1e-9):
        if x.is_factored:
            return bool(np.all(x.weights >= -tol) and abs(x.weights.sum() - self.radius) <= tol * max(1.0, self.radius)
                        and np.allclose(x.left, x.right, atol=1e-12))
        d = x.materialize()
        if abs(np.trace(d) - self.radius) > tol * max(1.0, self.radius):
            return False
        return bool(np.linalg.eigvalsh(0.5 * (d + d.T)).min() >= -tol * max(1.0, self.radius))

    def describe(self):
        return {"kind": "Spectrahedron", "p": self.p, "radius": self.radius, "method": self.method}


class NuclearBallLO(LOOracle):
    def __init__(self, p: int, q: int, radius: float, delta: float | None = None, method: str = "power",
                 rel_delta: float = DEFAULT_REL_DELTA, seed: int = 0, warm_start: bool = True):
        self.p, self.q = int(p), int(q)
        self.radius = float(radius)
        self.delta = delta
        self.method = method
        self.rel_delta = rel_delta
        self.seed = seed
        self.warm_start = warm_start
        self._rng = np.random.default_rng(seed)
        self._v = None

    @property
    def shape(self):
        return (self.p, self.q)

    def maximize(self, xi, **kw) -> LOResult:
        v0 = self._v if self.warm_start else None
        res = lo_nuclear(xi, self.radius, self.delta, self.method, self.rel_delta, rng=self._rng, v0=v0)
        self._v = res.point.right[0]
        return res

    def exact(self):
        return NuclearBallLO(self.p, self.q, self.radius, method="dense")

    def contains(self, x, tol=1e-9):
        if x.is_factored:
            ln = np.linalg.norm(x.left, axis=1) * np.linalg.norm(x.right, axis=1)
            return bool(float(np.sum(np.abs(x.weights) * ln)) <= self.radius * (1 + tol) + tol)
        return bool(np.linalg.svd(x.materialize(), compute_uv=False).sum() <= self.radius * (1 + tol) + tol)

    def describe(self):
        return {"kind": "NuclearBall", "p": self.p, "q": self.q, "radius": self.radius, "method": self.method}


class InfTwoBoxLO(LOOracle):
    """``X = {x in R^{M x q} : every row has l2 norm <= radius}``."""

    def __init__(self, n_blocks: int, block_size: int, radius: float):
        self.M, self.q = int(n_blocks), int(block_size)
        self.radius = float(radius)

    @property
    def shape(self):
        return (self.M, self.q)

    def maximize(self, xi, **kw):
        return lo_inf2box(xi, self.radius)

    def contains(self, x, tol=1e-9):
        d = x.materialize()
        return bool(np.linalg.norm(d, axis=1).max() <= self.radius * (1 + tol) + tol)

    def describe(self):
        return {"kind": "InfTwoBox", "blocks": self.M, "block_size": self.q, "radius": self.radius}


class BoxLO(LOOracle):
    """Coordinate box ``lo <= x <= hi``; ties go to ``lo``."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.radius = float(np.max(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    @property
    def shape(self):
        return self.lo.shape

    def maximize(self, xi, **kw):
        xi = np.asarray(xi, dtype=float)
        x = np.where(xi > 0, self.hi, self.lo)
        return LOResult(PrimalPoint(dense=x), float(np.vdot(x, xi)))

    def contains(self, x, tol=1e-9):
        d = x.materialize()
        return bool(np.all(d >= self.lo - tol) and np.all(d <= self.hi + tol))
