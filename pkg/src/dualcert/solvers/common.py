"""Configuration, results and field plumbing shared by the dual solvers."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import (AccuracyCertificate, ExecutionProtocol, GapTrace, certificate_resolution,
                    recover_primal_dual)


@dataclass
class SolverConfig:
    """Knobs of MD / MDL / NERML.

    ``eps`` is the absolute target resolution; ``budget`` caps the number of
    oracle calls.  With ``online=True`` the run ignores ``eps`` and keeps
    going until ``budget`` is spent, recording the running best resolution.
    """

    eps: float | None = None
    budget: int | None = None
    gamma: float = 0.5
    theta: float = 0.5
    m: int = 1
    omega: float | None = None
    L: float | None = None
    seed: int = 0
    online: bool = False
    anytime: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("memory m must be >= 1")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be positive")
        if self.online and self.budget is None:
            raise ValueError("online mode needs a step budget")
        if self.eps is None and self.budget is None:
            raise ValueError("give a target eps or a step budget")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SolverResult:
    solver: str
    protocol: ExecutionProtocol
    certificate: AccuracyCertificate
    trace: GapTrace
    resolution: float
    status: str
    wall_time: float = 0.0
    phases: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.protocol)

    def recover(self, certificate: AccuracyCertificate | None = None):
        """``(x_hat, y_hat)`` for the final certificate, or for a given one."""
        cert = self.certificate if certificate is None else certificate
        proto = self.protocol if len(cert) == len(self.protocol) else self.protocol.prefix(len(cert))
        return recover_primal_dual(proto, cert)

    def best(self):
        """Pair attached to the best resolution seen (``Gap`` of the trace)."""
        cert = self.trace.best
        if callable(cert):  # deferred certificate, built only when asked for
            cert = cert()
        if not isinstance(cert, AccuracyCertificate):
            cert = self.certificate
        return self.recover(cert)

    def max_delta(self, certificate: AccuracyCertificate | None = None) -> float:
        cert = self.certificate if certificate is None else certificate
        return self.protocol.max_delta(cert.weights)


class FieldAdapter:
    """Wrap ``y -> g`` or ``y -> (g, x, delta)`` into the latter form and count calls."""

    def __init__(self, fn: Callable, setup):
        self.fn = fn
        self.setup = setup
        self.calls = 0

    def __call__(self, y):
        out = self.fn(y)
        self.calls += 1
        if isinstance(out, tuple):
            g, x, delta = (tuple(out) + (None, 0.0))[:3]
        else:
            g, x, delta = out, None, 0.0
        g = np.asarray(g, dtype=float).reshape(self.setup.shape)
        return g, x, float(delta or 0.0)


class Clock:
    def __init__(self):
        self.t0 = time.perf_counter()

    def __call__(self) -> float:
        return time.perf_counter() - self.t0


def finish(solver, protocol, cert, trace, status, clock, setup, phases=None, extra=None) -> SolverResult:
    res = certificate_resolution(protocol, cert, setup)
    return SolverResult(solver, protocol, cert, trace, res, status, clock(), phases or [], extra or {})


def should_stop(cfg: SolverConfig, eps_t: float, steps: int) -> str | None:
    if eps_t <= 0.0:
        return "optimal"
    if not cfg.online and cfg.eps is not None and eps_t <= cfg.eps:
        return "converged"
    if cfg.budget is not None and steps >= cfg.budget:
        return "budget"
    return None


def omega_of(setup, cfg: SolverConfig) -> float:
    return cfg.omega if cfg.omega is not None else setup.omega_diameter()

