"""Auxiliary problems of the level methods.

* ``maxmin_affine``: ``Opt = max_{y in Y} min_j h_j(y)`` for affine
  ``h_j(y) = c_j - <g_j, y>``, together with simplex weights ``lam`` such that
  ``Opt = max_Y sum_j lam_j h_j``.
* ``level_project``: the omega-projection ``argmin {omega(y) - <lin, y> :
  y in Y, h_j(y) >= level}`` with its Lagrange multipliers.
* ``aggregate_bundle``: the multiplier-weighted average of bundle members.

Every bundle member remembers how it decomposes into the per-step functions
``h_tau(y) = <g_tau, y_tau - y>`` so certificates can be pushed back onto the
execution protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, lsq_linear, minimize, nnls

from .core import inner
from .prox import EuclideanBall, ProximalSetup

TOL_PROJ = 1e-8
FD_STEP = 1e-9  # forward-difference step in the Newton polish; small enough to stay on one affine piece


class AuxSolveError(RuntimeError):
    """An auxiliary problem could not be solved to the required accuracy."""

    def __init__(self, msg, **diag):
        super().__init__(msg + ("" if not diag else " " + repr(diag)))
        self.diag = diag


class AffineBundle:
    """Affine functions ``h_j(y) = c_j - <g_j, y>`` with protocol provenance.

    ``provenance[j]`` maps protocol step index to a nonnegative weight; the
    weights of each member sum to one.
    """

    def __init__(self, shape):
        self.shape = tuple(shape)
        self.consts: list[float] = []
        self.slopes: list[np.ndarray] = []
        self.provenance: list[dict[int, float]] = []

    @classmethod
    def from_arrays(cls, consts, slopes, provenance=None) -> "AffineBundle":
        slopes = np.asarray(slopes, dtype=float)
        b = cls(slopes.shape[1:])
        for j, (c, g) in enumerate(zip(consts, slopes)):
            b.add(c, g, None if provenance is None else provenance[j])
        return b

    def add(self, const: float, slope, provenance: dict | None = None) -> int:
        slope = np.asarray(slope, dtype=float)
        if slope.shape != self.shape:
            raise ValueError(f"slope shape {slope.shape} != bundle shape {self.shape}")
        self.consts.append(float(const))
        self.slopes.append(slope)
        self.provenance.append(dict(provenance) if provenance is not None else {})
        return len(self.consts) - 1

    def add_step(self, index: int, y, g) -> int:
        """Append ``h(z) = <g, y - z>`` tagged as protocol step ``index``."""
        return self.add(inner(g, y), g, {index: 1.0})

    def __len__(self) -> int:
        return len(self.consts)

    def subset(self, keep) -> "AffineBundle":
        b = AffineBundle(self.shape)
        for j in keep:
            b.add(self.consts[j], self.slopes[j], self.provenance[j])
        return b

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.consts)

    @property
    def G(self) -> np.ndarray:
        """Slopes flattened to a ``(k, n)`` matrix."""
        return np.stack([g.ravel() for g in self.slopes])

    def values(self, y) -> np.ndarray:
        return self.c - self.G @ np.ravel(y)

    def combine(self, weights):
        """``(const, slope, provenance)`` of ``sum_j weights_j h_j``; weights should sum to 1."""
        w = np.asarray(weights, dtype=float)
        const = float(w @ self.c)
        slope = (w @ self.G).reshape(self.shape)
        return const, slope, compose_provenance(self.provenance, w)


def compose_provenance(provs, weights) -> dict[int, float]:
    out: dict[int, float] = {}
    for p, w in zip(provs, weights):
        if w == 0.0:
            continue
        for k, v in p.items():
            out[k] = out.get(k, 0.0) + w * v
    return out


def provenance_to_weights(prov: dict[int, float], t: int) -> np.ndarray:
    w = np.zeros(t)
    for k, v in prov.items():
        w[k] += v
    return w


@dataclass
class MaxMinAnswer:
    opt: float
    lam: np.ndarray
    u: np.ndarray
    lower: float
    upper: float
    gap_aux: float = field(init=False)

    def __post_init__(self):
        self.gap_aux = self.upper - self.lower


def phi(setup: ProximalSetup, bundle: AffineBundle, lam) -> float:
    """``sum lam_j c_j + supp_Y(-sum lam_j g_j)``, an upper bound on the max-min value."""
    lam = np.asarray(lam, dtype=float)
    val, _ = setup.support(-(lam @ bundle.G).reshape(setup.shape))
    return float(lam @ bundle.c) + val


def _simplex_clean(lam) -> np.ndarray:
    lam = np.clip(np.asarray(lam, dtype=float), 0.0, None)
    s = lam.sum()
    if not s > 0:
        raise AuxSolveError("max-min weights vanished")
    lam = lam / s
    lam[np.argmax(lam)] += 1.0 - lam.sum()
    return lam


def maxmin_affine(setup: ProximalSetup, bundle: AffineBundle, tol: float | None = None) -> MaxMinAnswer:
    """Solve ``max_Y min_j h_j`` and its von Neumann dual over the simplex.

    The returned ``opt`` is the dual (upper) value ``phi(lam)``; ``u`` is a
    primal maximizer and ``min_j h_j(u)`` the lower bracket.
    """
    if len(bundle) == 0:
        raise ValueError("empty bundle")
    if len(bundle) == 1:
        val, u = setup.support(-bundle.slopes[0])
        lam = np.ones(1)
        up = bundle.consts[0] + val
        lo = float(bundle.values(u)[0])
        ans = MaxMinAnswer(up, lam, u, lo, up)
    elif setup.lp_form() is not None:
        ans = _maxmin_lp(setup, bundle)
    elif isinstance(setup, EuclideanBall):
        ans = _maxmin_ball(setup, bundle)
    else:
        raise NotImplementedError(f"no max-min solver for {type(setup).__name__}")
    scale = max(abs(ans.upper), abs(ans.lower), float(np.abs(bundle.c).max()))
    tol_aux = tol if tol is not None else max(1e-9, 1e-9 * scale)
    if not (ans.upper - ans.lower <= tol_aux):
        raise AuxSolveError("max-min bracket did not close", lower=ans.lower, upper=ans.upper, tol=tol_aux)
    return ans


def _maxmin_lp(setup, bundle) -> MaxMinAnswer:
    lp = setup.lp_form()
    k = len(bundle)
    nw = lp.T.shape[1]
    GT = bundle.G @ lp.T
    rows = [np.hstack([GT, np.ones((k, 1))])]
    rhs = [bundle.c]
    if lp.A_ub is not None:
        rows.append(np.hstack([lp.A_ub, np.zeros((lp.A_ub.shape[0], 1))]))
        rhs.append(lp.b_ub)
    A_eq = None if lp.A_eq is None else np.hstack([lp.A_eq, np.zeros((lp.A_eq.shape[0], 1))])
    cost = np.zeros(nw + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs), A_eq=A_eq, b_eq=lp.b_eq,
                  bounds=list(lp.bounds) + [(None, None)], method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise AuxSolveError("max-min LP failed", status=res.status, message=res.message)
    lam = _simplex_clean(-res.ineqlin.marginals[:k])
    u = (lp.T @ res.x[:nw]).reshape(setup.shape)
    if getattr(setup, "symmetric", False):
        u = 0.5 * (u + u.T)
    upper = phi(setup, bundle, lam)
    lower = float(bundle.values(u).min())
    return MaxMinAnswer(upper, lam, u, lower, upper)


def _maxmin_ball(setup: EuclideanBall, bundle: AffineBundle) -> MaxMinAnswer:
    G, c, rad = bundle.G, bundle.c, setup.radius
    k, n = G.shape
    cands = []
    # interior optimum: the LP over the enclosing box may already land inside the ball;
    # the inscribed box catches interior optima that are not unique (flat cuts)
    for half in (rad, rad / np.sqrt(n)):
        res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.hstack([G, np.ones((k, 1))]), b_ub=c,
                      bounds=[(-half, half)] * n + [(None, None)], method="highs-ds")
        if res.status == 0 and np.linalg.norm(res.x[:n]) <= rad:
            cands.append((_simplex_clean(-res.ineqlin.marginals), res.x[:n]))
    # boundary optimum: rough weights from SLSQP, then an exact solve on the active set
    lam_s = _simplex_min(lambda w: phi(setup, bundle, w), np.full(k, 1.0 / k), G, c, rad)
    s = G.T @ lam_s
    u_s = -rad * s / np.linalg.norm(s) if np.linalg.norm(s) > 0 else np.zeros(n)
    hv = c - G @ u_s
    sets = {tuple(np.flatnonzero(lam_s > 1e-7)), tuple(np.flatnonzero(hv <= hv.min() + 1e-6))}
    for act in sets:
        if act:
            out = _ball_active(G, c, rad, list(act))
            if out is not None:
                cands.append(out)
    cands.append((lam_s, u_s))
    cands.append((np.eye(k)[int(np.argmin(c + rad * np.linalg.norm(G, axis=1)))], _ball_primal(G, c, rad, cands)))
    # any simplex weight bounds from above and any ball point from below, so pick each side separately
    lam = min((lam for lam, _ in cands), key=lambda w: phi(setup, bundle, w))
    u = max((u for _, u in cands), key=lambda v: float(bundle.values(v.reshape(setup.shape)).min()))
    upper = phi(setup, bundle, lam)
    lower = float(bundle.values(u.reshape(setup.shape)).min())
    return MaxMinAnswer(upper, lam, u.reshape(setup.shape), lower, upper)


def _ball_primal(G, c, rad, cands):
    """SLSQP on ``max t : G y + t <= c, |y| <= rad``, warm-started at the best candidate point."""
    n = G.shape[1]
    y0 = max((u for _, u in cands), key=lambda v: float((c - G @ v).min()))
    z0 = np.r_[y0, float((c - G @ y0).min())]
    cons = [{"type": "ineq", "fun": lambda z: c - G @ z[:n] - z[n], "jac": lambda z: np.hstack([-G, -np.ones((G.shape[0], 1))])},
            {"type": "ineq", "fun": lambda z: rad**2 - z[:n] @ z[:n], "jac": lambda z: np.r_[-2.0 * z[:n], 0.0]}]
    res = minimize(lambda z: -z[n], z0, jac=lambda z: np.r_[np.zeros(n), -1.0], method="SLSQP", constraints=cons,
                   options={"ftol": 1e-15, "maxiter": 500})
    y = res.x[:n]
    ny = np.linalg.norm(y)
    return y * (rad / ny) if ny > rad else y


def _ball_active(G, c, rad, act):
    """Exact maximizer of ``min_{j in act} h_j`` over the ball when all of ``act`` tie at the optimum."""
    j0, rest = act[0], act[1:]
    n = G.shape[1]
    if rest:
        D = G[rest] - G[j0]
        e = c[rest] - c[j0]
        y0, *_ = np.linalg.lstsq(D, e, rcond=None)
        P = np.eye(n) - np.linalg.pinv(D) @ D
    else:
        y0 = np.zeros(n)
        P = np.eye(n)
    r2 = rad**2 - float(y0 @ y0)
    if r2 < 0:
        return None
    d = -P @ G[j0]
    nd = np.linalg.norm(d)
    y = y0 + (np.sqrt(r2) * d / nd if nd > 0 else 0.0)
    # weights: sum lam_j g_j = -kappa y with lam in the simplex, kappa >= 0
    w = 1e3 * max(1.0, float(np.abs(G[act]).max()))
    E = np.vstack([np.hstack([G[act].T, y[:, None]]), np.r_[np.full(len(act), w), 0.0][None, :]])
    f = np.r_[np.zeros(n), w]
    sol, _ = nnls(E, f, maxiter=50 * (n + len(act) + 2))
    if sol[: len(act)].sum() <= 0:
        return None
    lam = np.zeros(G.shape[0])
    lam[act] = sol[: len(act)]
    return _simplex_clean(lam), y


def _simplex_min(fun, lam0, G, c, rad):
    k = lam0.size

    def jac(w):
        s = G.T @ w
        ns = np.linalg.norm(s)
        return c + (rad * (G @ s) / ns if ns > 0 else 0.0)

    res = minimize(fun, lam0, jac=jac, method="SLSQP", bounds=[(0, 1)] * k,
                   constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0, "jac": lambda w: np.ones(k)}],
                   options={"ftol": 1e-16, "maxiter": 500})
    return _simplex_clean(res.x)


@dataclass
class ProjectionAnswer:
    y: np.ndarray
    mu: np.ndarray
    feas_residual: float
    comp_residual: float
    iterations: int = 0


def level_project(setup: ProximalSetup, anchor, bundle: AffineBundle, level: float, mu0=None,
                  use_anchor: bool = True, tol: float = TOL_PROJ) -> ProjectionAnswer:
    """``argmin {omega(y) - <omega'(anchor), y> : y in Y, h_j(y) >= level}`` by dual ascent.

    With ``use_anchor=False`` the linear term is dropped (plain omega-projection
    of the omega-center).  The dual ``d(mu)`` is maximized over ``mu >= 0``
    with L-BFGS-B; each evaluation is a single ``mirror_argmin`` call.
    """
    k = len(bundle)
    G, c = bundle.G, bundle.c
    lin = setup.omega_grad(anchor).ravel() if use_anchor else np.zeros(G.shape[1])
    rhs = c - level

    def primal(mu):
        return setup.mirror_argmin((mu @ G - lin).reshape(setup.shape))

    def negdual(mu):
        y = primal(mu)
        yf = y.ravel()
        d = setup.omega(y) + float((mu @ G - lin) @ yf) - float(mu @ rhs)
        # h_j(y) - level is the gradient of -d
        return -d, (c - G @ yf) - level

    y0 = primal(np.zeros(k))
    if float(bundle.values(y0).min()) >= level:
        return ProjectionAnswer(y0, np.zeros(k), 0.0, 0.0, 0)
    x0 = np.zeros(k) if mu0 is None or len(mu0) != k else np.maximum(np.asarray(mu0, dtype=float), 0.0)
    best = None
    its = 0

    def answer(mu):
        y = primal(mu)
        hv = bundle.values(y) - level
        feas = float(max(0.0, -hv.min()))
        # complementarity of the normalized weights mu / sum(mu), which is what the aggregate cut uses
        comp = float(np.max(np.abs(mu * hv))) / max(1.0, float(mu.sum()))
        return ProjectionAnswer(y, mu, feas, comp, its)

    for attempt in range(3):
        res = minimize(negdual, x0, jac=True, method="L-BFGS-B", bounds=[(0, None)] * k,
                       options={"maxiter": 5000, "maxfun": 20000, "ftol": 0.0, "gtol": 1e-14, "maxcor": 30})
        its += res.nit
        mu1 = np.maximum(res.x, 0.0)
        for mu in (mu1, _newton_polish(G, c, level, mu1, primal, tol), _dual_newton(G, c, level, mu1, primal, negdual, tol)):
            if np.max(mu, initial=0.0) > 1e12:
                raise AuxSolveError("level set appears empty (dual unbounded)", level=level, mu_max=float(mu.max()))
            cand = answer(mu)
            if best is None or max(cand.feas_residual, cand.comp_residual) < max(best.feas_residual, best.comp_residual):
                best = cand
        if best.feas_residual <= tol and best.comp_residual <= tol:
            return best
        x0 = best.mu
    raise AuxSolveError("level projection did not reach tolerance", feas=best.feas_residual,
                        comp=best.comp_residual, level=level)


def _newton_polish(G, c, level, mu, primal, tol, max_iter: int = 40):
    """Projected Newton on the multipliers, starting from an approximate dual solution.

    The working set holds constraints with positive multipliers or negative
    slack.  ``d h_A / d mu_A = G_A D G_A^T`` where ``D`` is the derivative of
    ``y(mu)``; its columns come from forward differences of ``y(mu)``, which
    are exact for piecewise-linear Euclidean projections away from kinks.
    Returns the best multiplier vector seen (by KKT residual).
    """
    def kkt(m):
        y = primal(m).ravel()
        hv = c - G @ y - level
        feas = max(0.0, -hv.min())
        comp = np.max(np.abs(m * hv)) / max(1.0, m.sum())
        return y, hv, max(feas, comp)

    m = mu.copy()
    y, hv, err = kkt(m)
    best_m, best_err = m, err
    for _ in range(max_iter):
        if best_err <= 0.1 * tol:
            break
        act = np.flatnonzero((m > 0) | (hv < 0))
        if act.size == 0:
            break
        J = np.empty((act.size, act.size))
        for col, j in enumerate(act):
            t = FD_STEP * max(1.0, m[j]) / max(np.linalg.norm(G[j]), 1e-300)
            mj = m.copy()
            mj[j] += t
            J[:, col] = (G[act] @ (y - primal(mj).ravel())) / t
        step, *_ = np.linalg.lstsq(J, -hv[act], rcond=None)
        # backtrack on the KKT residual
        alpha = 1.0
        for _bt in range(30):
            m_new = m.copy()
            m_new[act] = np.maximum(m[act] + alpha * step, 0.0)
            y_new, hv_new, err_new = kkt(m_new)
            if err_new < err:
                break
            alpha *= 0.5
        else:
            break
        m, y, hv, err = m_new, y_new, hv_new, err_new
        if err < best_err:
            best_m, best_err = m, err
    return best_m


def _dual_newton(G, c, level, mu, primal, negdual, tol, max_iter: int = 100):
    """Damped Newton ascent on the concave dual ``d(mu)`` over ``mu >= 0``.

    Each step maximizes the model ``-hv^T D - D^T H D / 2 - rho |D|^2 / 2``
    subject to ``mu + D >= 0``, where ``H = G (dy/dlin) G^T`` comes from
    forward differences of ``y(mu)``.  Unlike the residual Newton above this
    tolerates a singular ``H`` (more near-active cuts than free directions of
    ``y``) and keeps the bounds exact; ``rho`` grows on rejected steps.
    Returns the best multiplier vector seen (by KKT residual).
    """
    k = mu.size

    def kkt(m):
        y = primal(m).ravel()
        hv = c - G @ y - level
        return y, hv, max(0.0, -hv.min(), np.max(np.abs(m * hv)) / max(1.0, m.sum()))

    m = mu.copy()
    y, hv, err = kkt(m)
    nd = negdual(m)[0]
    best_m, best_err = m, err
    rho = 1e-6
    for _ in range(max_iter):
        if best_err <= 0.1 * tol:
            break
        H = np.empty((k, k))
        for j in range(k):
            t = FD_STEP * max(1.0, m[j]) / max(np.linalg.norm(G[j]), 1e-300)
            mj = m.copy()
            mj[j] += t
            H[:, j] = (G @ (y - primal(mj).ravel())) / t
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        Msq = (V * np.sqrt(np.maximum(w, 0.0))).T
        scale = max(1.0, float(w.max(initial=0.0)))
        improved = False
        for _try in range(12):
            r = np.sqrt(rho * scale)
            A = np.vstack([Msq, r * np.eye(k)])
            b = np.r_[np.zeros(k), -hv / r]
            step = lsq_linear(A, b, bounds=(-m, np.inf), method="bvls").x
            m_new = np.maximum(m + step, 0.0)
            nd_new = negdual(m_new)[0]
            y_new, hv_new, err_new = kkt(m_new)
            if nd_new < nd or err_new < err:
                improved = True
                rho = max(rho / 10.0, 1e-14)
                break
            rho *= 10.0
        if not improved:
            break
        m, y, hv, err, nd = m_new, y_new, hv_new, err_new, nd_new
        if err < best_err:
            best_m, best_err = m, err
    return best_m


def aggregate_bundle(bundle: AffineBundle, mu):
    """``(const, slope, provenance)`` of ``(1/sum mu) sum mu_j h_j``, or ``None`` when ``sum mu = 0``."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (len(bundle),):
        raise ValueError("multiplier count does not match the bundle")
    if np.any(mu < 0):
        raise ValueError("multipliers must be nonnegative")
    s = mu.sum()
    if s == 0.0:
        return None
    return bundle.combine(mu / s)
