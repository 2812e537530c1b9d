"""Proximal setups for the dual domain ``Y``.

Each setup bundles a norm, a distance-generating function ``omega`` that is
strongly convex with modulus 1 w.r.t. that norm, the omega-center, the
omega-diameter, and the two oracles the solvers rely on:

* ``mirror_argmin(a) = argmin_{z in Y} omega(z) + <a, z>``, from which the
  prox-mapping ``Prox_y(xi) = mirror_argmin(xi - omega'(y))`` follows;
* ``support(eta) = max_{y in Y} <eta, y>`` together with a maximizer.

Polyhedral setups additionally expose an LP description used by the
auxiliary max-min solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlogy

from .core import inner

ENTROPY_FLOOR = 1e-300


class BisectionError(RuntimeError):
    pass


@dataclass
class LPForm:
    """``Y = {T w : A_ub w <= b_ub, A_eq w = b_eq, bounds}``, ``T`` given as a matrix."""

    T: np.ndarray
    A_ub: np.ndarray | None
    b_ub: np.ndarray | None
    A_eq: np.ndarray | None
    b_eq: np.ndarray | None
    bounds: list


class ProximalSetup:
    """Base class; subclasses fill in the geometry."""

    shape: tuple
    norm_name = "l2"
    polyhedral = False

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    # -- norms -------------------------------------------------------------
    def norm(self, v) -> float:
        return float(np.linalg.norm(np.ravel(v)))

    def dual_norm(self, v) -> float:
        return float(np.linalg.norm(np.ravel(v)))

    # -- d.g.f. ------------------------------------------------------------
    def omega(self, y) -> float:
        raise NotImplementedError

    def omega_grad(self, y) -> np.ndarray:
        raise NotImplementedError

    @property
    def center(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def omega_min(self) -> float:
        return self.omega(self.center)

    def omega_diameter(self) -> float:
        raise NotImplementedError

    def mirror_argmin(self, a) -> np.ndarray:
        raise NotImplementedError

    def prox_map(self, y, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if not np.all(np.isfinite(xi)):
            raise ValueError("prox_map needs a finite xi")
        return self.mirror_argmin(xi - self.omega_grad(y))

    def bregman(self, y, z) -> float:
        return self.omega(z) - self.omega(y) - inner(self.omega_grad(y), np.asarray(z) - np.asarray(y))

    # -- geometry ----------------------------------------------------------
    def support(self, eta):
        raise NotImplementedError

    def contains(self, y, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """A random point of ``Y`` (not uniformly distributed)."""
        raise NotImplementedError

    def lp_form(self) -> LPForm | None:
        return None

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "shape": list(self.shape)}


# ---------------------------------------------------------------------------
# projections


def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    a = np.abs(v).ravel()
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def project_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    n = np.linalg.norm(v.ravel())
    if n <= radius:
        return np.array(v, dtype=float)
    return v * (radius / n)


def project_box_hyperplane(v: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Projection onto ``{0 <= y <= 1, <signs, y> = 0}`` with ``signs`` in {-1, 1}.

    ``s(nu) = sum signs * clip(v - nu*signs, 0, 1)`` is piecewise linear and
    nonincreasing in ``nu``; its root is located exactly among the breakpoints.
    """
    v = np.asarray(v, dtype=float)

    bps = np.unique(np.concatenate([signs * v, signs * (v - 1.0)]))
    vals = _resid_vec(v, signs, bps)
    # vals is nonincreasing along bps
    if vals[0] < 0 or vals[-1] > 0:
        raise BisectionError("box-hyperplane projection: empty feasible set")
    hit = np.flatnonzero(vals == 0.0)
    if hit.size:
        nu = bps[hit[0]]
    else:
        j = np.searchsorted(-vals, 0.0)  # first index with vals < 0
        lo, hi = bps[j - 1], bps[j]
        flo, fhi = vals[j - 1], vals[j]
        nu = lo + (hi - lo) * flo / (flo - fhi)
    y = np.clip(v - nu * signs, 0.0, 1.0)
    return y


def _resid_vec(v, signs, bps):
    # vectorised residuals at all breakpoints: (B, n) may be large; chunk it
    out = np.empty(bps.size)
    step = max(1, 2_000_000 // max(v.size, 1))
    for s in range(0, bps.size, step):
        nus = bps[s : s + step, None]
        out[s : s + step] = np.clip(v[None, :] - nus * signs[None, :], 0.0, 1.0) @ signs
    return out


# ---------------------------------------------------------------------------
# setups


class EuclideanBall(ProximalSetup):
    """``{y : ||y||_2 <= radius}`` with ``omega = 0.5 <y, y>``."""

    def __init__(self, dim: int, radius: float = 1.0):
        self.shape = (int(dim),)
        self.radius = float(radius)

    def omega(self, y):
        return 0.5 * inner(y, y)

    def omega_grad(self, y):
        return np.array(y, dtype=float)

    @property
    def center(self):
        return np.zeros(self.shape)

    def omega_diameter(self):
        return self.radius

    def mirror_argmin(self, a):
        return project_ball(-np.asarray(a, dtype=float), self.radius)

    def bregman(self, y, z):
        d = np.asarray(z) - np.asarray(y)
        return 0.5 * inner(d, d)

    def support(self, eta):
        eta = np.asarray(eta, dtype=float)
        n = np.linalg.norm(eta)
        if n == 0:
            return 0.0, np.zeros(self.shape)
        return self.radius * n, eta * (self.radius / n)

    def contains(self, y, tol=1e-9):
        return bool(np.linalg.norm(np.ravel(y)) <= self.radius * (1 + tol) + tol)

    def sample(self, rng):
        d = rng.standard_normal(self.shape)
        d /= np.linalg.norm(d)
        return d * self.radius * rng.uniform() ** (1.0 / self.dim)

    def describe(self):
        return {"kind": "EuclideanBall", "shape": list(self.shape), "radius": self.radius}


class L1Ball(ProximalSetup):
    """``{y : sum |y_i| <= radius}`` over vectors or (symmetric) matrices.

    ``dgf="euclidean"`` pairs the set with ``0.5 ||y||_2^2`` and the l2 norm;
    ``dgf="power"`` pairs it with ``alpha ln(p) sum |y|^(1 + r)``,
    ``r = min(1, 1/ln p)``, and the l1 norm, where ``p`` is the matrix side
    (vector length for vectors).  The default ``alpha`` is the smallest
    constant giving modulus 1 w.r.t. l1 on the unit ball:
    ``n^r / ((1 + r) r ln p)`` with ``n`` the entry count, which is
    ``n^(1/ln p) / (1 + 1/ln p)`` once ``p >= 3``.
    """

    def __init__(self, shape, radius: float = 1.0, dgf: str = "euclidean", alpha: float | None = None,
                 symmetric: bool = False):
        self.shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
        self.radius = float(radius)
        self.symmetric = bool(symmetric)
        if self.symmetric and (len(self.shape) != 2 or self.shape[0] != self.shape[1]):
            raise ValueError("symmetric L1Ball needs a square matrix shape")
        if dgf not in ("euclidean", "power"):
            raise ValueError(f"unknown d.g.f. {dgf!r}")
        self.dgf = dgf
        self.polyhedral = True
        if dgf == "power":
            if self.radius != 1.0:
                raise ValueError("power d.g.f. is calibrated for the unit l1 ball")
            p = self.shape[0]
            if p < 2:
                raise ValueError("power d.g.f. needs p >= 2")
            self.log_p = math.log(p)
            # the exponent is capped at 2: beyond it omega flattens at 0 (p = 2)
            self.r = min(1.0, 1.0 / self.log_p)
            n = self.dim
            default = n ** self.r / ((1.0 + self.r) * self.r * self.log_p)
            self.alpha = float(alpha) if alpha is not None else default
            self.coef = self.alpha * self.log_p
            self.norm_name = "l1"
        else:
            self.alpha = None
            self.norm_name = "l2"

    # norms
    def norm(self, v):
        v = np.ravel(v)
        return float(np.abs(v).sum()) if self.dgf == "power" else float(np.linalg.norm(v))

    def dual_norm(self, v):
        v = np.ravel(v)
        return float(np.abs(v).max()) if self.dgf == "power" else float(np.linalg.norm(v))

    # d.g.f.
    def omega(self, y):
        y = np.asarray(y, dtype=float)
        if self.dgf == "euclidean":
            return 0.5 * inner(y, y)
        return self.coef * float(np.sum(np.abs(y) ** (1.0 + self.r)))

    def omega_grad(self, y):
        y = np.asarray(y, dtype=float)
        if self.dgf == "euclidean":
            return y.copy()
        return self.coef * (1.0 + self.r) * np.sign(y) * np.abs(y) ** self.r

    @property
    def center(self):
        return np.zeros(self.shape)

    def omega_diameter(self):
        if self.dgf == "euclidean":
            return self.radius
        return math.sqrt(2.0 * self.coef)

    def mirror_argmin(self, a):
        a = np.asarray(a, dtype=float)
        if self.symmetric:
            # only the symmetric part of ``a`` sees symmetric points; the
            # entrywise solution for symmetric ``a`` is itself symmetric
            a = 0.5 * (a + a.T)
        if self.dgf == "euclidean":
            z = project_l1_ball(-a, self.radius)
        else:
            z = self._power_argmin(a)
        if self.symmetric:
            z = 0.5 * (z + z.T)
        return z

    def _power_argmin(self, a):
        # per coordinate: min c|z|^q + a z + lam |z|  ->  |z| = ((|a|-lam)_+ / (c q))^(1/r)
        q = 1.0 + self.r
        cq = self.coef * q
        absa = np.abs(a)
        inv_r = 1.0 / self.r

        def mags(lam):
            return (np.maximum(absa - lam, 0.0) / cq) ** inv_r

        def excess(lam):
            return float(mags(lam).sum()) - self.radius

        if excess(0.0) <= 0.0:
            lam = 0.0
        else:
            hi = float(absa.max())
            try:
                lam = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            except (RuntimeError, ValueError) as exc:  # pragma: no cover - defensive
                raise BisectionError(f"power prox multiplier search failed: {exc}") from exc
        z = -np.sign(a) * mags(lam)
        s = np.abs(z).sum()
        if s > self.radius:
            z *= self.radius / s
        return z

    def bregman(self, y, z):
        if self.dgf == "euclidean":
            d = np.asarray(z) - np.asarray(y)
            return 0.5 * inner(d, d)
        return super().bregman(y, z)

    # geometry
    def support(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.symmetric:
            eta = 0.5 * (eta + eta.T)
        flat = np.abs(eta).ravel()
        i = int(np.argmax(flat))  # lowest index on ties
        val = self.radius * float(flat[i])
        arg = np.zeros(self.dim)
        if flat[i] > 0:
            arg[i] = self.radius * np.sign(eta.ravel()[i])
        arg = arg.reshape(self.shape)
        if self.symmetric:
            arg = 0.5 * (arg + arg.T)
        return val, arg

    def contains(self, y, tol=1e-9):
        y = np.asarray(y)
        ok = float(np.abs(y).sum()) <= self.radius * (1 + tol) + tol
        if ok and self.symmetric:
            ok = bool(np.max(np.abs(y - y.T), initial=0.0) <= tol * max(1.0, float(np.abs(y).max(initial=0.0))))
        return ok

    def sample(self, rng):
        d = rng.standard_normal(self.shape) * rng.exponential(size=self.shape)
        if self.symmetric:
            d = 0.5 * (d + d.T)
        n = np.abs(d).sum()
        return d * (self.radius * rng.uniform() ** 0.5 / n)

    def lp_form(self):
        # y = T (w+ - w-) with w >= 0 and a weighted l1 budget; symmetric matrices
        # are parametrized by their upper triangle, off-diagonal entries counting twice
        if self.symmetric:
            p = self.shape[0]
            iu, ju = np.triu_indices(p)
            B = np.zeros((p * p, iu.size))
            B[iu * p + ju, np.arange(iu.size)] = 1.0
            B[ju * p + iu, np.arange(iu.size)] = 1.0
            cost = np.where(iu == ju, 1.0, 2.0)
        else:
            B = np.eye(self.dim)
            cost = np.ones(self.dim)
        T = np.hstack([B, -B])
        A_ub = np.concatenate([cost, cost])[None, :]
        return LPForm(T=T, A_ub=A_ub, b_ub=np.array([self.radius]), A_eq=None, b_eq=None,
                      bounds=[(0, None)] * T.shape[1])

    def describe(self):
        return {"kind": "L1Ball", "shape": list(self.shape), "radius": self.radius, "dgf": self.dgf,
                "alpha": self.alpha, "symmetric": self.symmetric}


class BoxHyperplane(ProximalSetup):
    """``{0 <= y <= 1, sum_j signs_j y_j = 0}`` with the Euclidean d.g.f."""

    def __init__(self, signs):
        s = np.asarray(signs, dtype=float).ravel()
        if not np.all(np.isin(s, (-1.0, 1.0))):
            raise ValueError("signs must be +-1")
        if not (np.any(s > 0) and np.any(s < 0)):
            raise ValueError("both signs must be present, otherwise Y reduces to {0} only")
        self.signs = s
        self.shape = (s.size,)
        self.polyhedral = True

    def omega(self, y):
        return 0.5 * inner(y, y)

    def omega_grad(self, y):
        return np.array(y, dtype=float)

    @property
    def center(self):
        return np.zeros(self.shape)

    def omega_diameter(self):
        # max ||y||^2 over Y: all-ones on min(#pos, #neg) coordinates of each sign
        k = min(int(np.sum(self.signs > 0)), int(np.sum(self.signs < 0)))
        return math.sqrt(2.0 * k)

    def mirror_argmin(self, a):
        return project_box_hyperplane(-np.asarray(a, dtype=float), self.signs)

    def bregman(self, y, z):
        d = np.asarray(z) - np.asarray(y)
        return 0.5 * inner(d, d)

    def support(self, eta):
        """Greedy pairing: the k-th best positive-sign coordinate with the k-th best negative one."""
        eta = np.asarray(eta, dtype=float)
        pos = np.flatnonzero(self.signs > 0)
        neg = np.flatnonzero(self.signs < 0)
        po = pos[np.argsort(-eta[pos], kind="stable")]
        no = neg[np.argsort(-eta[neg], kind="stable")]
        k = min(po.size, no.size)
        pair = eta[po[:k]] + eta[no[:k]]
        take = int(np.sum(pair > 0))  # pair sums are nonincreasing
        y = np.zeros(self.shape)
        y[po[:take]] = 1.0
        y[no[:take]] = 1.0
        return float(pair[:take].sum()), y

    def contains(self, y, tol=1e-9):
        y = np.asarray(y)
        n = y.size
        return bool(y.min() >= -tol and y.max() <= 1 + tol and abs(float(self.signs @ y)) <= tol * n)

    def sample(self, rng):
        v = rng.uniform(-0.5, 1.5, size=self.shape)
        return project_box_hyperplane(v, self.signs)

    def lp_form(self):
        n = self.dim
        return LPForm(T=np.eye(n), A_ub=None, b_ub=None, A_eq=self.signs[None, :], b_eq=np.zeros(1),
                      bounds=[(0, 1)] * n)

    def describe(self):
        return {"kind": "BoxHyperplane", "shape": list(self.shape), "signs": self.signs.astype(int).tolist()}


class SimplexProduct(ProximalSetup):
    """``N`` blocks of ``M`` nonnegative entries, each block summing to ``1/N``.

    Points are ``(N, M)`` arrays.  Entropy d.g.f. ``sum y ln y``, l1 norm.
    """

    norm_name = "l1"

    def __init__(self, n_blocks: int, block_size: int):
        self.N = int(n_blocks)
        self.M = int(block_size)
        if self.N < 1 or self.M < 1:
            raise ValueError("need at least one block of size >= 1")
        self.shape = (self.N, self.M)
        self.polyhedral = True

    def norm(self, v):
        return float(np.abs(np.ravel(v)).sum())

    def dual_norm(self, v):
        return float(np.abs(np.ravel(v)).max())

    def omega(self, y):
        return float(np.sum(xlogy(y, y)))

    def omega_grad(self, y):
        return 1.0 + np.log(np.maximum(np.asarray(y, dtype=float), ENTROPY_FLOOR))

    @property
    def center(self):
        return np.full(self.shape, 1.0 / (self.N * self.M))

    @property
    def omega_min(self):
        return -math.log(self.N * self.M)

    def omega_diameter(self):
        return math.sqrt(2.0 * math.log(self.M))

    def mirror_argmin(self, a):
        a = np.asarray(a, dtype=float).reshape(self.shape)
        z = -(a - a.min(axis=1, keepdims=True))
        e = np.exp(z)
        y = e / (self.N * e.sum(axis=1, keepdims=True))
        return np.maximum(y, ENTROPY_FLOOR)

    def bregman(self, y, z):
        y = np.maximum(np.asarray(y, dtype=float), ENTROPY_FLOOR)
        z = np.asarray(z, dtype=float)
        return float(np.sum(xlogy(z, z) - xlogy(z, y)) - z.sum() + y.sum())

    def support(self, eta):
        eta = np.asarray(eta, dtype=float).reshape(self.shape)
        idx = np.argmax(eta, axis=1)  # lowest index on ties
        y = np.zeros(self.shape)
        y[np.arange(self.N), idx] = 1.0 / self.N
        return float(eta[np.arange(self.N), idx].sum() / self.N), y

    def contains(self, y, tol=1e-9):
        y = np.asarray(y).reshape(self.shape)
        return bool(y.min() >= -tol / self.N and np.all(np.abs(y.sum(axis=1) - 1.0 / self.N) <= tol / self.N + 1e-15))

    def sample(self, rng):
        y = rng.dirichlet(np.full(self.M, 0.5), size=self.N) / self.N
        return np.maximum(y, ENTROPY_FLOOR)

    def lp_form(self):
        n = self.dim
        A_eq = np.kron(np.eye(self.N), np.ones((1, self.M)))
        return LPForm(T=np.eye(n), A_ub=None, b_ub=None, A_eq=A_eq, b_eq=np.full(self.N, 1.0 / self.N),
                      bounds=[(0, None)] * n)

    def describe(self):
        return {"kind": "SimplexProduct", "shape": list(self.shape)}


def omega_diameter(setup: ProximalSetup) -> float:
    return setup.omega_diameter()


def prox_map(setup: ProximalSetup, y, xi):
    return setup.prox_map(y, xi)


def bregman(setup: ProximalSetup, y, z) -> float:
    return setup.bregman(y, z)


def support(setup: ProximalSetup, eta):
    return setup.support(eta)
