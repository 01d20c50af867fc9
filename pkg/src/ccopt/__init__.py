"""Global solutions, stationarity certificates and stationary duals for
composite cardinality problems  min f(x) + g(Ax) + Phi(Bx - b)."""

from .certificate import Certificate, DimensionError, IndeterminateError, UnsupportedAtomError, Verdict
from .model import build_primal, derive_dual, objective_eval, theta, xi
from .enumeration import brute_force_grid, compute_thresholds, enumerate_global, select_mu
from .stationarity import check_slater, check_stationary_dual, check_stationary_primal, dual_to_primal, primal_to_dual
from .diagnostics import existence_check_dual, existence_check_primal, svm_separability
from .zoo import build_example, generate_data

__all__ = [
    "Certificate", "DimensionError", "IndeterminateError", "UnsupportedAtomError", "Verdict",
    "build_primal", "derive_dual", "objective_eval", "theta", "xi",
    "brute_force_grid", "compute_thresholds", "enumerate_global", "select_mu",
    "check_slater", "check_stationary_dual", "check_stationary_primal", "dual_to_primal", "primal_to_dual",
    "existence_check_dual", "existence_check_primal", "svm_separability",
    "build_example", "generate_data",
]
