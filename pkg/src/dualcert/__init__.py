"""First-order methods with accuracy certificates for problems given by a Fenchel-type representation.

The primal ``max_{x in X} f_*(x)`` is only accessible through a linear
optimization oracle on ``X``; the solvers run on the dual over a proximal-
friendly ``Y`` and turn their execution protocol into primal solutions with a
certified gap.
"""

from .core import (AccuracyCertificate, ExecutionProtocol, GapTrace, PrimalPoint, RunRecord, certificate_resolution,
                   recover_primal_dual)
from .duality import DualField, FenchelProblem, dual_eval, duality_gap, estimate_Lf
from .solvers import SolverConfig, SolverResult, md_run, mdl_run, nerml_run, scg_run

__version__ = "0.1.0"

__all__ = [
    "AccuracyCertificate", "ExecutionProtocol", "GapTrace", "PrimalPoint", "RunRecord",
    "certificate_resolution", "recover_primal_dual",
    "FenchelProblem", "DualField", "dual_eval", "duality_gap", "estimate_Lf",
    "SolverConfig", "SolverResult", "md_run", "mdl_run", "nerml_run", "scg_run",
]
