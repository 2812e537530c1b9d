"""Mirror Descent with accuracy certificates."""

from __future__ import annotations

import math
from functools import partial

import numpy as np

from ..core import AccuracyCertificate, ExecutionProtocol, GapTrace, inner
from .common import Clock, FieldAdapter, SolverConfig, SolverResult, finish, omega_of


def md_run(field, setup, cfg: SolverConfig, trace: GapTrace | None = None) -> SolverResult:
    """``y_{tau+1} = Prox_{y_tau}(gamma_tau g_tau)`` from ``y_1 = y_omega``.

    With a fixed horizon ``t = cfg.budget`` the stepsizes are
    ``gamma_tau = Omega / (sqrt(t) ||g_tau||_*)`` and the certificate is
    ``lam ~ gamma``, which guarantees resolution ``<= Omega L / sqrt(t)``.
    ``cfg.anytime`` switches to ``sqrt(tau)`` (no horizon, no certified bound).
    A vanishing ``g`` stops the run with the one-hot certificate of that step.
    In target mode (``cfg.eps`` set, not online) the run stops as soon as the
    running certificate reaches ``eps``.
    """
    if cfg.budget is None:
        raise ValueError("MD needs the step budget in advance")
    fld = field if isinstance(field, FieldAdapter) else FieldAdapter(field, setup)
    clock = Clock()
    t = cfg.budget
    omega = omega_of(setup, cfg)
    proto = ExecutionProtocol(setup)
    trace = GapTrace() if trace is None else trace
    gammas: list[float] = []
    # running sums for the prefix certificate lam ~ gamma
    s_gamma = 0.0
    s_gy = 0.0
    s_g = np.zeros(setup.shape)
    y = setup.center
    status = "budget"
    cert = None
    for tau in range(1, t + 1):
        g, x, delta = fld(y)
        proto.append(y, g, x, delta)
        gn = setup.dual_norm(g)
        if gn == 0.0:
            cert = AccuracyCertificate.one_hot(tau, tau - 1)
            trace.update(tau, 0.0, cert, clock())
            status = "optimal"
            break
        step = omega / (math.sqrt(tau if cfg.anytime else t) * gn)
        gammas.append(step)
        s_gamma += step
        s_gy += step * inner(g, y)
        s_g += step * g
        eps_t = s_gy / s_gamma + setup.support(-s_g / s_gamma)[0]
        if eps_t < trace.gap:
            # building the prefix certificate costs O(tau); defer it so long runs stay linear
            trace.update(tau, eps_t, partial(_prefix_certificate, gammas, tau), clock())
        else:
            trace.update(tau, eps_t, None, clock())
        if not cfg.online and cfg.eps is not None and eps_t <= cfg.eps:
            status = "converged"
            break
        if tau < t:
            y = setup.prox_map(y, step * g)
    if cert is None:
        cert = AccuracyCertificate.normalized(gammas)
    return finish("md", proto, cert, trace, status, clock, setup,
                  extra={"stepsizes": np.asarray(gammas), "omega": omega})


def _prefix_certificate(gammas: list, k: int) -> AccuracyCertificate:
    return AccuracyCertificate.normalized(gammas[:k])


def md_bound(omega: float, L: float, t: int) -> float:
    """Certified resolution of the fixed-horizon policy after ``t`` steps."""
    return omega * L / math.sqrt(t)


def md_stepsize_bound(setup, stepsizes, dual_norms, omega: float) -> float:
    """``(Omega^2 + sum gamma^2 ||g||_*^2) / (2 sum gamma)`` for executed stepsizes."""
    g = np.asarray(stepsizes)
    d = np.asarray(dual_norms)[: g.size]
    return (omega**2 + float(np.sum(g**2 * d**2))) / (2.0 * float(g.sum()))
