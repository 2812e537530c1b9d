"""Non-Euclidean Restricted Memory Level method with accuracy certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..auxsolve import (AffineBundle, aggregate_bundle, level_project, maxmin_affine,
                        provenance_to_weights)
from ..core import AccuracyCertificate, ExecutionProtocol, GapTrace, inner
from .common import Clock, FieldAdapter, SolverConfig, SolverResult, finish


@dataclass
class NermlPhase:
    index: int
    start_step: int
    f: float
    level: float


def nerml_bound_constant(gamma: float, theta: float, numerator: str = "proof") -> float:
    """``C(gamma, theta)`` of the NERML step bound ``C Omega^2 L^2 / eps^2``.

    ``numerator="proof"`` uses ``1 + 2 gamma^2``, the constant the convergence
    argument actually delivers; ``"short"`` uses the smaller ``1 + gamma^2``.
    """
    if numerator not in ("proof", "short"):
        raise ValueError(f"unknown numerator {numerator!r}")
    num = 1.0 + (2.0 if numerator == "proof" else 1.0) * gamma**2
    q = gamma + (1.0 - gamma) * theta
    return num / (gamma**2 * (1.0 - q**2))


def _certificate(prov: dict, t: int) -> AccuracyCertificate:
    return AccuracyCertificate.normalized(provenance_to_weights(prov, t))


def nerml_run(field, setup, cfg: SolverConfig, trace: GapTrace | None = None) -> SolverResult:
    """Level method keeping at most ``m + 1`` affine cuts.

    Each phase fixes a level ``ell_s = gamma f_s``.  A step adds the cut at the
    current point, solves the max-min over the ``m + 1`` cuts (its value is
    the step's resolution and its weights, pushed through the cut provenance,
    the certificate) and either terminates, opens a new phase once the value
    fell below ``ell_s + theta (f_s - ell_s)``, or omega-projects onto the
    level set and compresses the cuts to ``m`` using the projection
    multipliers.  Every phase restarts from ``y_omega``; the oracle answer at
    ``y_omega`` is computed once and reused, but each visit is still a
    protocol step.
    """
    fld = field if isinstance(field, FieldAdapter) else FieldAdapter(field, setup)
    clock = Clock()
    gamma, theta, m = cfg.gamma, cfg.theta, cfg.m
    proto = ExecutionProtocol(setup)
    trace = GapTrace() if trace is None else trace
    phases: list[NermlPhase] = []
    omega_gain: list[tuple[int, float, float]] = []  # (phase, omega(u_tau), omega(u_tau+1))
    center = setup.center
    g1 = fld(center)
    cached = g1

    def stop_now(eps_t, steps):
        if not cfg.online and cfg.eps is not None and eps_t <= cfg.eps:
            return "converged"
        if cfg.budget is not None and steps >= cfg.budget:
            return "budget"
        return None

    t0 = proto.append(center, *g1)
    f1 = inner(g1[0], center) + setup.support(-g1[0])[0]
    cert = AccuracyCertificate.one_hot(1, 0)
    trace.update(1, max(f1, 0.0), cert, clock())
    if f1 <= 0.0:
        return finish("nerml", proto, cert, trace, "optimal", clock, setup, phases=phases)
    status = stop_now(f1, 1) if cfg.budget == 1 else None
    h_s = (inner(g1[0], center), g1[0], {t0: 1.0})
    f_s = f1
    while status is None:
        level = gamma * f_s
        phases.append(NermlPhase(len(phases) + 1, len(proto) + 1, f_s, level))
        slots = [h_s] * m
        u = center
        while True:
            g, x, dlt = cached if u is center else fld(u)
            t = proto.append(u, g, x, dlt)
            bundle = AffineBundle(setup.shape)
            for c, s, p in slots:
                bundle.add(c, s, p)
            bundle.add_step(t, u, g)
            ans = maxmin_affine(setup, bundle)
            opt = ans.opt
            h_agg_tau = bundle.combine(ans.lam)
            step_cert = _certificate(h_agg_tau[2], t + 1)
            improved = opt < trace.gap
            trace.update(t + 1, opt, step_cert if improved else None, clock())
            cert = step_cert
            status = stop_now(opt, t + 1)
            if status is None and opt <= 0.0:
                status = "optimal"
            if status is not None:
                break
            if opt < level + theta * (f_s - level):
                # case B: next phase
                h_s = h_agg_tau
                f_s = opt
                break
            # case C: project onto the level set and compress the cuts
            proj = level_project(setup, center, bundle, level, use_anchor=False)
            omega_gain.append((len(phases), setup.omega(u), setup.omega(proj.y)))
            agg = aggregate_bundle(bundle, proj.mu)
            order = np.argsort(ans.lam, kind="stable")
            n_drop = 1 if agg is None else 2
            keep = sorted(order[n_drop:].tolist())
            members = [(bundle.consts[j], bundle.slopes[j], bundle.provenance[j]) for j in keep]
            slots = ([agg] if agg is not None else []) + members
            u = proj.y
    return finish("nerml", proto, cert, trace, status, clock, setup, phases=phases,
                  extra={"omega_gain": omega_gain})
