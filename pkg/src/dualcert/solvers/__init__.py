"""Certificate-producing dual solvers and smoothed conditional gradient."""

from .common import FieldAdapter, SolverConfig, SolverResult
from .level import mdl_run, mdl_step_bound
from .md import md_bound, md_run, md_stepsize_bound
from .nerml import nerml_bound_constant, nerml_run
from .smoothing import cg_run, scg_run, smoothed_value_grad

SOLVERS = {"md": md_run, "mdl": mdl_run, "nerml": nerml_run}

__all__ = [
    "FieldAdapter", "SolverConfig", "SolverResult", "SOLVERS",
    "md_run", "md_bound", "md_stepsize_bound", "mdl_run", "mdl_step_bound",
    "nerml_run", "nerml_bound_constant", "cg_run", "scg_run", "smoothed_value_grad",
]
