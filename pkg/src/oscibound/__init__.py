"""Weakly coupled bound states of rapidly oscillating potentials in two dimensions.

Computes the trace functional phi_V, the modified Fredholm determinants and
the bound-state parameter lambda* for -Laplacian + V_eps, and cross-checks
the result against a finite-difference eigensolver.
"""

from .fredholm import (
    DeterminantValue,
    TraceFunctional,
    TraceValue,
    born_phi,
    cross_term_integral,
    det2,
    det_identity_residual,
    eigencondition,
    phi_V,
)
from .nystrom import QuadratureGrid, build_grid, operator_norm
from .oracle import FDConfig, OracleEigenvalue, dense_phi_oracle, direct_eigensolve, h_minus2_sandwich_norm
from .potential import BumpProfile, Mode, PotentialSpec, integral_lambda0, single_pair_spec
from .rootfind import BoundStateResult, predicted_energy, predicted_lambda, solve_bound_state, uniqueness_scan
from .specfun import bessel_K0, kernel_F, kernel_H0, resolvent_kernel_R0

__version__ = "0.1.0"

__all__ = [
    "BoundStateResult", "BumpProfile", "DeterminantValue", "FDConfig", "Mode", "OracleEigenvalue",
    "PotentialSpec", "QuadratureGrid", "TraceFunctional", "TraceValue", "bessel_K0", "born_phi",
    "build_grid", "cross_term_integral", "dense_phi_oracle", "det2", "det_identity_residual",
    "direct_eigensolve", "eigencondition", "h_minus2_sandwich_norm", "integral_lambda0", "kernel_F",
    "kernel_H0", "operator_norm", "phi_V", "predicted_energy", "predicted_lambda",
    "resolvent_kernel_R0", "single_pair_spec", "solve_bound_state", "uniqueness_scan",
]
