"""Bilinear saddle data and the dual first-order oracle.

A problem is given by ``F(x, y) = <x, A y + a> + <c, y>`` on ``X x Y`` with

    f_*(x) = min_{y in Y} F(x, y)        (primal, maximized over X)
    f(y)   = max_{x in X} F(x, y)        (dual, minimized over Y)

The dual oracle needs one LO call: with ``x(y) = x_X(A y + a)`` we get
``f(y) = F(x(y), y)`` and ``f'(y) = A^* x(y) + c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import PrimalPoint, inner
from .lo import LOOracle
from .prox import ProximalSetup


@dataclass
class FenchelProblem:
    Y: ProximalSetup
    X: LOOracle
    apply_A: Callable  # y -> element of E_x (dense or scipy.sparse)
    adjoint: Callable  # PrimalPoint -> element of E_y
    primal_value: Callable  # PrimalPoint -> f_*(x)
    c: np.ndarray | None = None
    a: np.ndarray | None = None
    Lf_bound: float | None = None
    name: str = "problem"

    def xi(self, y):
        out = self.apply_A(np.asarray(y, dtype=float))
        if self.a is not None:
            out = out + self.a
        return out

    def psi(self, y) -> float:
        return 0.0 if self.c is None else inner(self.c, y)

    def lin(self) -> np.ndarray:
        return np.zeros(self.Y.shape) if self.c is None else np.asarray(self.c, dtype=float)

    def saddle_value(self, x: PrimalPoint, y) -> float:
        out = x.inner(self.apply_A(np.asarray(y, dtype=float))) + self.psi(y)
        if self.a is not None:
            out += x.inner(self.a)
        return out


@dataclass
class DualOracleAnswer:
    value: float
    grad: np.ndarray
    x: PrimalPoint
    delta: float = 0.0
    residual: float = 0.0


def dual_eval(problem: FenchelProblem, y, lo: LOOracle | None = None) -> DualOracleAnswer:
    """``f(y)``, ``f'(y)`` and the LO answer ``x(y)`` behind them."""
    lo = problem.X if lo is None else lo
    y = np.asarray(y, dtype=float)
    res = lo.maximize(problem.xi(y))
    value = res.value + problem.psi(y)
    grad = np.asarray(problem.adjoint(res.point), dtype=float).reshape(problem.Y.shape) + problem.lin()
    return DualOracleAnswer(value, grad, res.point, res.delta, res.residual)


class DualField:
    """The vector field ``y -> f'(y)`` of a problem, callable by the solvers.

    Calls return ``(g, x, delta)``; ``value`` gives ``f(y)`` when needed.
    """

    def __init__(self, problem: FenchelProblem, lo: LOOracle | None = None):
        self.problem = problem
        self.lo = lo
        self.setup = problem.Y
        self.calls = 0

    def __call__(self, y):
        ans = dual_eval(self.problem, y, self.lo)
        self.calls += 1
        return ans.grad, ans.x, ans.delta


def duality_gap(problem: FenchelProblem, x_hat: PrimalPoint, y_hat, tol: float = 1e-9) -> float:
    """``f(y_hat) - f_*(x_hat)`` with ``f`` evaluated by an exact LO copy."""
    if not problem.Y.contains(y_hat, tol):
        raise ValueError("y_hat is not in Y")
    if not problem.X.contains(x_hat, tol):
        raise ValueError("x_hat is not in X")
    f = dual_eval(problem, y_hat, problem.X.exact()).value
    return f - problem.primal_value(x_hat)


def estimate_Lf(problem: FenchelProblem, samples: int = 32, seed: int = 0) -> float:
    """``sup_Y ||f'(y)||_*``: the closed-form bound when known, else 1.1 x the sampled max.

    If the sampled norms are all equal to machine precision the field is taken
    to be constant and the common value is returned as is.
    """
    if problem.Lf_bound is not None:
        return float(problem.Lf_bound)
    rng = np.random.default_rng(seed)
    pts = [problem.Y.center] + [problem.Y.sample(rng) for _ in range(samples - 1)]
    norms = [problem.Y.dual_norm(dual_eval(problem, y).grad) for y in pts]
    top = max(norms)
    if top - min(norms) <= 1e-14 * max(1.0, top):
        return top
    return 1.1 * top
