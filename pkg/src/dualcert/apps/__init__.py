"""Concrete problem families as ``FenchelProblem`` builders."""

from .io import load_instance, multiclass_from_csv, save_instance, svm_from_csv
from .mc import McInstance, build_mc_dual, gen_mc
from .multiclass import MulticlassInstance, build_multiclass, gen_multiclass
from .psd import PsdCompletionInstance, build_psd_completion, gen_psd
from .svm import SvmInstance, build_svm, gen_svm, hinge_risk

__all__ = [
    "McInstance", "gen_mc", "build_mc_dual",
    "PsdCompletionInstance", "gen_psd", "build_psd_completion",
    "SvmInstance", "gen_svm", "build_svm", "hinge_risk",
    "MulticlassInstance", "gen_multiclass", "build_multiclass",
    "load_instance", "save_instance", "svm_from_csv", "multiclass_from_csv",
]
