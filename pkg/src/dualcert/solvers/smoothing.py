"""Smoothed conditional gradient: CG on the smoothed primal objective.

Adding ``beta * (omega(y) - min omega)`` inside the Fenchel minimum turns the
nonsmooth concave ``f_*`` into a smooth ``f_*^beta`` with
``f_* <= f_*^beta <= f_* + beta Omega^2 / 2``, whose gradient ``A y(x) + a``
costs one mirror step on ``Y``.  Conditional gradient then only needs the LO
oracle of ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import PrimalPoint, RunRecord
from ..duality import FenchelProblem, dual_eval
from .common import Clock

COMPACT_FACTOR = 2


def smoothed_value_grad(problem: FenchelProblem, x: PrimalPoint, beta: float):
    """``(f_*^beta(x), grad f_*^beta(x), y(x))``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    Y = problem.Y
    lin = np.asarray(problem.adjoint(x), dtype=float).reshape(Y.shape) + problem.lin()
    y = Y.mirror_argmin(lin / beta)
    value = float(np.vdot(lin, y)) + beta * (Y.omega(y) - Y.omega_min)
    if problem.a is not None:
        value += x.inner(problem.a)
    return value, problem.xi(y), y


def _compact(x: PrimalPoint) -> PrimalPoint:
    """Dense fallback once a factored iterate carries many more terms than its size warrants."""
    if x.is_factored and x.weights.size > COMPACT_FACTOR * max(x.shape):
        return PrimalPoint(dense=x.materialize())
    return x


def _fw_gap(grad, s: PrimalPoint, x: PrimalPoint) -> float:
    return s.inner(grad) - x.inner(grad)


@dataclass
class CGResult:
    x: PrimalPoint
    values: list = field(default_factory=list)
    fw_gaps: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    steps: int = 0
    status: str = "budget"


def cg_run(oracle: Callable, lo, x1: PrimalPoint, budget: int, stop_gap: float | None = None,
           monotone: bool = True) -> CGResult:
    """Conditional gradient ``x_{t+1} = x_t + 2/(t+1) (x_X(grad f(x_t)) - x_t)`` for a concave ``f``.

    ``oracle(x) -> (value, grad)``.  With ``monotone=True`` the previous point
    is kept whenever the standard step would decrease ``f`` (allowed by the
    recurrence, which only asks for at least the standard step's value).
    ``values[t-1]`` is ``f(x_t)``; ``fw_gaps[t-1]`` the Frank-Wolfe gap at
    ``x_t``.  By concavity every ``f(x_tau) + fw_gap_tau`` bounds ``max f``
    from above, so ``gaps[t-1] = min_tau (f(x_tau) + fw_gap_tau) - f(x_t)``
    certifies ``x_t`` (each term also carries the LO's ``delta``); it is what
    ``stop_gap`` is compared with.
    """
    x = x1
    val, grad = oracle(x)
    out = CGResult(x)
    upper = np.inf
    for t in range(1, budget + 1):
        ans = lo.maximize(grad)
        s = ans.point
        fw = _fw_gap(grad, s, x)
        # an inexact LO answer undershoots the linear maximum by at most its delta
        upper = min(upper, val + fw + ans.delta)
        out.values.append(val)
        out.fw_gaps.append(fw)
        out.gaps.append(upper - val)
        out.steps = t
        if stop_gap is not None and upper - val <= stop_gap:
            out.status = "converged"
            break
        if t == budget:
            break
        alpha = 2.0 / (t + 1)
        cand = _compact(PrimalPoint.combine([x, s], [1.0 - alpha, alpha]))
        cval, cgrad = oracle(cand)
        if monotone and cval < val:
            continue
        x, val, grad = cand, cval, cgrad
    out.x = x
    return out


@dataclass
class SCGResult:
    x: PrimalPoint
    beta: float
    omega: float
    cg: CGResult
    primal_values: list
    status: str
    wall_time: float

    def record(self, params: dict | None = None, seed: int | None = None) -> RunRecord:
        final = self.cg.gaps[-1] if self.cg.gaps else np.inf
        return RunRecord("scg", dict(params or {}, beta=self.beta, omega=self.omega), seed, float(final),
                         self.cg.steps, self.wall_time, {"status": self.status})


def scg_run(problem: FenchelProblem, eps: float, budget: int = 100000, x1: PrimalPoint | None = None,
            track_primal: bool = False) -> SCGResult:
    """Find ``x`` with ``f_*(x) >= Opt - eps`` by CG on ``f_*^beta``, ``beta = eps / Omega^2``.

    CG stops once its certified gap on the smoothed problem is ``<= eps/2``;
    together with the smoothing error ``eps/2`` this bounds the primal
    suboptimality by ``eps``.  When the budget runs out first the last iterate
    is returned with ``status="budget"``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    clock = Clock()
    omega = problem.Y.omega_diameter()
    beta = eps / omega**2
    if x1 is None:
        x1 = dual_eval(problem, problem.Y.center).x
    primal = []

    def oracle(x):
        v, g, _ = smoothed_value_grad(problem, x, beta)
        if track_primal:
            primal.append(problem.primal_value(x))
        return v, g

    cg = cg_run(oracle, problem.X, x1, budget, stop_gap=eps / 2.0)
    return SCGResult(cg.x, beta, omega, cg, primal, cg.status, clock())
