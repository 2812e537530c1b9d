"""Mirror Descent Level method (full memory) with accuracy certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..auxsolve import AffineBundle, level_project, maxmin_affine
from ..core import AccuracyCertificate, ExecutionProtocol, GapTrace
from .common import Clock, FieldAdapter, SolverConfig, SolverResult, finish, should_stop


@dataclass
class MdlPhase:
    index: int
    start_step: int
    delta: float


def mdl_run(field, setup, cfg: SolverConfig, trace: GapTrace | None = None) -> SolverResult:
    """Bundle-level method with omega-projections onto level sets.

    At step ``t`` the bundle ``I_t^+ = I_{t-1} + {t}`` gives
    ``eps_t = max_Y min_{tau in I_t^+} h_tau`` and weights ``lam^t`` (zero off
    the bundle).  When ``eps_t <= gamma Delta_{s-1}`` a phase starts: the bundle
    shrinks to the positive-weight steps plus step 1 and the projection anchor
    resets to ``y_omega``; otherwise the bundle is kept and the anchor is
    ``y_t``.  The next point is the omega-projection of the anchor onto
    ``{h_tau >= gamma eps_t, tau in I_t}``.
    """
    fld = field if isinstance(field, FieldAdapter) else FieldAdapter(field, setup)
    clock = Clock()
    gamma = cfg.gamma
    proto = ExecutionProtocol(setup)
    trace = GapTrace() if trace is None else trace
    phases: list[MdlPhase] = []
    bundle_sizes: list[int] = []
    active: list[int] = []
    delta_prev = np.inf
    y = setup.center
    cert = None
    status = "budget"
    while True:
        g, x, dlt = fld(y)
        t = proto.append(y, g, x, dlt)  # 0-based index of this step
        plus = active + [t]
        bundle = AffineBundle(setup.shape)
        for j in plus:
            bundle.add_step(j, proto[j].y, proto[j].g)
        ans = maxmin_affine(setup, bundle)
        eps_t = ans.opt
        lam = np.zeros(t + 1)
        lam[plus] = ans.lam
        cert = AccuracyCertificate.normalized(lam)
        trace.update(t + 1, eps_t, cert if eps_t < trace.gap else None, clock())
        stop = should_stop(cfg, eps_t, t + 1)
        if stop:
            status = stop
            break
        if eps_t <= gamma * delta_prev:
            # case A: step t starts a new phase
            phases.append(MdlPhase(len(phases) + 1, t + 1, eps_t))
            delta_prev = eps_t
            active = sorted(set(np.flatnonzero(lam > 0).tolist()) | {0})
            anchor = setup.center
        else:
            active = plus
            anchor = y
        bundle_sizes.append(len(active))
        proj_bundle = bundle if active == plus else bundle.subset([plus.index(j) for j in active])
        proj = level_project(setup, anchor, proj_bundle, gamma * eps_t)
        y = proj.y
    return finish("mdl", proto, cert, trace, status, clock, setup, phases=phases,
                  extra={"bundle_sizes": bundle_sizes})


def mdl_step_bound(omega: float, L: float, gamma: float, eps: float) -> float:
    """Worst-case number of MDL steps to reach resolution ``eps``."""
    return 2.0 * omega**2 * L**2 / (gamma**4 * (1.0 - gamma**2) * eps**2) + 1.0
