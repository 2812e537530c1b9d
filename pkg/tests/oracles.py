"""Independent reference solvers used by the tests.

None of these call the package's prox, max-min or projection routines; they
only use a setup's ``omega``/``omega_grad`` (the definition of the d.g.f.)
and an explicit description of the set.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize

from dualcert.prox import BoxHyperplane, EuclideanBall, L1Ball, SimplexProduct


# ----------------------------------------------------------- set descriptions

def lifted(setup):
    """``Y = {T w : A_ub w <= b_ub, A_eq w = b_eq, lo <= w <= hi}`` written out by hand."""
    n = setup.dim
    if isinstance(setup, L1Ball):
        if setup.symmetric:
            p = setup.shape[0]
            iu, ju = np.triu_indices(p)
            B = np.zeros((p * p, iu.size))
            B[iu * p + ju, np.arange(iu.size)] = 1.0
            B[ju * p + iu, np.arange(iu.size)] = 1.0
            cost = np.where(iu == ju, 1.0, 2.0)
        else:
            B, cost = np.eye(n), np.ones(n)
        T = np.hstack([B, -B])
        k = T.shape[1]
        return T, np.concatenate([cost, cost])[None, :], np.array([setup.radius]), None, None, np.zeros(k), np.full(k, np.inf)
    if isinstance(setup, BoxHyperplane):
        return np.eye(n), None, None, setup.signs[None, :], np.zeros(1), np.zeros(n), np.ones(n)
    if isinstance(setup, SimplexProduct):
        A_eq = np.kron(np.eye(setup.N), np.ones((1, setup.M)))
        return np.eye(n), None, None, A_eq, np.full(setup.N, 1.0 / setup.N), np.zeros(n), np.full(n, np.inf)
    raise TypeError(type(setup).__name__)


def hrep(setup):
    """``(H, h, E, e)`` with ``Y = {z : H z <= h, E z = e}`` for vector setups of dimension <= 4."""
    n = setup.dim
    if isinstance(setup, L1Ball) and not setup.symmetric:
        H = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
        return H, np.full(len(H), setup.radius), np.zeros((0, n)), np.zeros(0)
    if isinstance(setup, BoxHyperplane):
        return np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([np.ones(n), np.zeros(n)]), setup.signs[None, :], np.zeros(1)
    if isinstance(setup, SimplexProduct):
        return -np.eye(n), np.zeros(n), np.kron(np.eye(setup.N), np.ones((1, setup.M))), np.full(setup.N, 1.0 / setup.N)
    raise TypeError(type(setup).__name__)


# ---------------------------------------------------------------- prox oracle

def _fd_hessian(grad, z):
    # relative steps: the power d.g.f. has unbounded curvature near zero
    n = z.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1e-6 * abs(z[i]) if z[i] != 0 else 1e-8
        H[:, i] = (grad(z + e) - grad(z - e)) / (2 * e[i])
    return 0.5 * (H + H.T)


def _newton_polish(fz, gz, T, A_ub, b_ub, A_eq, b_eq, lo, hi, w, iters=200, act_tol=1e-9, interior=False):
    """Newton on the KKT system of the active set identified at ``w``, backtracking on the KKT residual.

    ``interior=True`` is for barrier-like d.g.f.s (entropy) whose minimizer
    never touches the lower bounds: nothing is fixed there and steps stop
    short of the boundary instead of being clipped.
    """
    rows, rhs = [], []
    if A_eq is not None:
        rows.append(A_eq)
        rhs.append(b_eq)
    if A_ub is not None:
        act = b_ub - A_ub @ w <= act_tol * max(1.0, np.abs(b_ub).max())
        rows.append(A_ub[act])
        rhs.append(b_ub[act])
    if interior:
        fix_lo = fix_hi = np.zeros(w.size, dtype=bool)
        w = np.maximum(w, 1e-300)
    else:
        fix_lo = w - lo <= act_tol
        fix_hi = hi - w <= act_tol
    I = np.eye(w.size)
    rows += [I[fix_lo], I[fix_hi]]
    rhs += [lo[fix_lo], hi[fix_hi]]
    E = np.vstack(rows)
    e = np.concatenate(rhs)
    w = w.copy()
    w[fix_lo] = lo[fix_lo]
    w[fix_hi] = hi[fix_hi]
    m = E.shape[0]
    nu = np.linalg.lstsq(E.T, -T.T @ gz(T @ w), rcond=None)[0]

    def resid(w, nu):
        return np.concatenate([T.T @ gz(T @ w) + E.T @ nu, E @ w - e])

    r = resid(w, nu)
    for _ in range(iters):
        H = T.T @ _fd_hessian(gz, T @ w) @ T
        K = np.block([[H, E.T], [E, np.zeros((m, m))]])
        d = np.linalg.lstsq(K, -r, rcond=None)[0]
        step, improved = 1.0, False
        if interior:
            neg = d[:w.size] < 0
            if np.any(neg):
                step = min(1.0, 0.99 * float(np.min(w[neg] / -d[:w.size][neg])))
        for _bt in range(60):
            w2 = w + step * d[:w.size] if interior else np.clip(w + step * d[:w.size], lo, hi)
            nu2 = nu + step * d[w.size:]
            r2 = resid(w2, nu2)
            if np.linalg.norm(r2) < np.linalg.norm(r):
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        w, nu, r = w2, nu2, r2
    return w


def _ball_solve(fz, gz, radius, n, G=None, cvec=None, level=None, z0=None):
    """Minimize ``fz`` over the ball (and ``G z <= c - level``) by SLSQP, then Newton-KKT."""
    cons = [{"type": "ineq", "fun": lambda z: radius**2 - z @ z, "jac": lambda z: -2 * z}]
    if G is not None:
        cons.append({"type": "ineq", "fun": lambda z: cvec - level - G @ z, "jac": lambda z: -G})
    z = np.zeros(n) if z0 is None else z0
    res = minimize(fz, z, jac=gz, constraints=cons, method="SLSQP", options={"ftol": 1e-15, "maxiter": 2000})
    z = res.x
    for _ in range(60):
        sph = radius**2 - z @ z <= 1e-9
        lin_act = np.zeros(0, dtype=bool) if G is None else (cvec - level - G @ z <= 1e-9)
        A = np.zeros((0, n)) if G is None else G[lin_act]
        b = np.zeros(0) if G is None else (cvec - level)[lin_act]
        H = _fd_hessian(gz, z)
        k = A.shape[0] + int(sph)
        # KKT: grad + 2 mu z + A^T nu = 0, constraints tight
        J = np.zeros((n + k, n + k))
        F = np.zeros(n + k)
        mu_nu = np.zeros(k)
        rows = []
        if sph:
            rows.append(2 * z)
        rows += list(A)
        C = np.array(rows).reshape(k, n)
        # least-squares multipliers at the current point
        if k:
            mu_nu = np.linalg.lstsq(C.T, -gz(z), rcond=None)[0]
        Hl = H + (2 * mu_nu[0] * np.eye(n) if sph else 0.0)
        J[:n, :n] = Hl
        J[:n, n:] = C.T
        J[n:, :n] = C
        F[:n] = gz(z) + C.T @ mu_nu
        cons_val = []
        if sph:
            cons_val.append(z @ z - radius**2)
        cons_val += list(A @ z - b)
        F[n:] = cons_val
        d = np.linalg.lstsq(J, -F, rcond=None)[0]
        z_new = z + d[:n]
        if np.linalg.norm(d[:n]) <= 1e-15 * max(1.0, np.linalg.norm(z)):
            z = z_new
            break
        z = z_new
    return z


def generic_prox(setup, y, xi):
    """``argmin_z <xi, z> + V_y(z)`` over ``Y`` by a constrained NLP solve plus Newton polish."""
    shape = setup.shape
    lin = np.ravel(xi) - np.ravel(setup.omega_grad(y))

    def fz(z):
        return setup.omega(z.reshape(shape)) + lin @ z

    def gz(z):
        return np.ravel(setup.omega_grad(z.reshape(shape))) + lin

    if isinstance(setup, EuclideanBall):
        return _ball_solve(fz, gz, setup.radius, setup.dim).reshape(shape)
    T, A_ub, b_ub, A_eq, b_eq, lo, hi = lifted(setup)
    if isinstance(setup, SimplexProduct):
        w0 = np.linalg.lstsq(T, np.ravel(setup.center), rcond=None)[0]
        return (T @ _interior_newton(fz, gz, T, A_eq, w0)).reshape(shape)
    w = _nlp(fz, gz, T, A_ub, b_ub, A_eq, b_eq, lo, hi, setup)
    w = _newton_polish(fz, gz, T, A_ub, b_ub, A_eq, b_eq, lo, hi, w)
    return (T @ w).reshape(shape)


def _interior_newton(fz, gz, T, A_eq, w, iters=500):
    """Feasible-start damped Newton for a barrier-like objective on ``{A_eq w = b, w > 0}``.

    ``w`` must be strictly feasible.  Steps keep a fraction of the distance
    to the boundary and backtrack on the objective (Armijo), so the iterates
    stay feasible and the method converges from anywhere in the interior.
    """
    n, m = w.size, A_eq.shape[0]
    f = fz(T @ w)
    for _ in range(iters):
        g = T.T @ gz(T @ w)
        H = T.T @ _fd_hessian(gz, T @ w) @ T
        # curvatures span ~1e20 near the boundary: solve the KKT system in variables scaled by diag(H)^(-1/2)
        D = 1.0 / np.sqrt(np.maximum(np.diag(H), 1e-300))
        Es = A_eq * D[None, :]
        K = np.block([[D[:, None] * H * D[None, :], Es.T], [Es, np.zeros((m, m))]])
        d = D * np.linalg.solve(K, np.concatenate([-D * g, np.zeros(m)]))[:n]
        dec = -float(g @ d)
        if dec <= 1e-24:
            break
        neg = d < 0
        step = min(1.0, 0.99 * float(np.min(w[neg] / -d[neg]))) if np.any(neg) else 1.0
        while step > 1e-20:
            w2 = w + step * d
            f2 = fz(T @ w2)
            if np.all(w2 > 0) and f2 <= f - 0.25 * step * dec:
                break
            step *= 0.5
        else:
            break
        w, f = w2, f2
    return w


def _nlp(fz, gz, T, A_ub, b_ub, A_eq, b_eq, lo, hi, setup):
    cons = []
    if A_ub is not None:
        cons.append({"type": "ineq", "fun": lambda w: b_ub - A_ub @ w, "jac": lambda w: -A_ub})
    if A_eq is not None:
        cons.append({"type": "eq", "fun": lambda w: A_eq @ w - b_eq, "jac": lambda w: A_eq})
    bounds = [(l, None if np.isinf(h) else h) for l, h in zip(lo, hi)]
    w0 = np.linalg.lstsq(T, np.ravel(setup.center), rcond=None)[0]
    w0 = np.clip(w0, lo, hi)
    if isinstance(setup, L1Ball):
        w0 = np.zeros(T.shape[1])
    res = minimize(lambda w: fz(T @ w), w0, jac=lambda w: T.T @ gz(T @ w), bounds=bounds, constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 3000})
    return np.clip(res.x, lo, hi)


# ------------------------------------------------------------ max-min oracles

def maxmin_vertex(setup, c, G):
    """``max_z min_j c_j - <g_j, z>`` over a polyhedral ``Y`` by enumerating LP vertices in ``(z, s)``."""
    H, h, E, e = hrep(setup)
    n = G.shape[1]
    A = np.vstack([np.hstack([G, np.ones((len(c), 1))]), np.hstack([H, np.zeros((len(h), 1))])])
    b = np.concatenate([c, h])
    Eq = np.hstack([E, np.zeros((len(e), 1))])
    need = n + 1 - np.linalg.matrix_rank(Eq) if len(e) else n + 1
    best = -np.inf
    for S in itertools.combinations(range(len(b)), need):
        M = np.vstack([A[list(S)], Eq])
        r = np.concatenate([b[list(S)], e])
        if np.linalg.matrix_rank(M) < n + 1:
            continue
        v = np.linalg.lstsq(M, r, rcond=None)[0]
        if np.all(A @ v <= b + 1e-10) and np.allclose(Eq @ v, e, atol=1e-10):
            best = max(best, v[-1])
    return best


def maxmin_grid(setup, c, G, n_grid=401):
    """Coarse value of the max-min by a grid over a 2-D (or 3-D) bounding box of ``Y``."""
    n = G.shape[1]
    if n > 3:
        raise ValueError("grid oracle only for dim <= 3")
    pts = n_grid if n == 2 else 61
    axes = [np.linspace(-1.0, 1.0, pts)] * n
    Z = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)
    Z = Z[[setup.contains(z.reshape(setup.shape), 1e-12) for z in Z]] if not isinstance(setup, EuclideanBall) \
        else Z[np.linalg.norm(Z, axis=1) <= setup.radius]
    vals = (c[None, :] - Z @ G.T).min(axis=1)
    return float(vals.max())


def maxmin_ball(radius, c, G):
    """Max-min over a Euclidean ball: best grid point refined by SLSQP on ``(z, s)``."""
    n = G.shape[1]
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((20000, n))
    Z *= (radius * rng.random(20000) ** (1.0 / n) / np.linalg.norm(Z, axis=1))[:, None]
    Z = np.vstack([Z, np.zeros(n)])
    vals = (c[None, :] - Z @ G.T).min(axis=1)
    z0 = Z[np.argmax(vals)]
    x0 = np.concatenate([z0, [vals.max()]])
    cons = [{"type": "ineq", "fun": lambda v: radius**2 - v[:n] @ v[:n]},
            {"type": "ineq", "fun": lambda v: c - G @ v[:n] - v[n]}]
    res = minimize(lambda v: -v[n], x0, jac=lambda v: np.concatenate([np.zeros(n), [-1.0]]), constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 2000})
    z = res.x[:n]
    z *= min(1.0, radius / max(np.linalg.norm(z), 1e-300))
    return float((c - G @ z).min())


def level_project_primal(setup, anchor, c, G, level, use_anchor=True):
    """``argmin omega(z) - <omega'(anchor), z>`` over ``Y`` and ``c - G z >= level`` by NLP + Newton polish."""
    shape = setup.shape
    lin = -np.ravel(setup.omega_grad(anchor)) if use_anchor else np.zeros(setup.dim)

    def fz(z):
        return setup.omega(z.reshape(shape)) + lin @ z

    def gz(z):
        return np.ravel(setup.omega_grad(z.reshape(shape))) + lin

    if isinstance(setup, EuclideanBall):
        return _ball_solve(fz, gz, setup.radius, setup.dim, G, c, level).reshape(shape)
    T, A_ub, b_ub, A_eq, b_eq, lo, hi = lifted(setup)
    GT = G @ T
    A2 = GT if A_ub is None else np.vstack([A_ub, GT])
    b2 = (c - level) if b_ub is None else np.concatenate([b_ub, c - level])
    w = _nlp(fz, gz, T, A2, b2, A_eq, b_eq, lo, hi, setup)
    w = _newton_polish(fz, gz, T, A2, b2, A_eq, b_eq, lo, hi, w, interior=isinstance(setup, SimplexProduct))
    return (T @ w).reshape(shape)
