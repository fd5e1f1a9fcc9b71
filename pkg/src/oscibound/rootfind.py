"""Bound-state root of g(lambda) = 1 + ln(lambda) phi_V(lambda) on (0, M]."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .fredholm import TraceFunctional
from .nystrom import ConvergenceError, QuadratureGrid
from .potential import PotentialError, PotentialSpec, check_eps, integral_lambda0, sup_bound_M

log = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-8
G_RESIDUAL_TOL = 1e-12

PhiFunc = Callable[[float], float]


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundStateResult:
    lambda_star: float
    energy: float
    lambda_pred: float
    g_residual: float
    bracket: tuple[float, float]
    iterations: int


def _prediction_exponent(spec: PotentialSpec, eps: float) -> float:
    eps = check_eps(eps)
    total = integral_lambda0(spec)
    if not total > 0:
        raise PotentialError("no modes: the effective density integrates to zero")
    return 2.0 * math.pi / (eps * eps * total)


def predicted_lambda(spec: PotentialSpec, eps: float) -> float:
    """exp(-2pi / (eps^2 int Lambda0)), the leading-order bound-state parameter."""
    return math.exp(-_prediction_exponent(spec, eps))


def predicted_energy(spec: PotentialSpec, eps: float) -> float:
    return -math.exp(-2.0 * _prediction_exponent(spec, eps))


def lower_bracket(spec: PotentialSpec, eps: float) -> float:
    try:
        lam = predicted_lambda(spec, eps)
    except PotentialError:
        return LAMBDA_FLOOR
    return max(min(lam / 100.0, LAMBDA_FLOOR), 1e-300)


def _phi_callable(spec, eps, grid, phi_func) -> PhiFunc:
    if phi_func is not None:
        return phi_func
    if grid is None:
        raise ValueError("a grid is required unless phi_func is supplied")
    tf = TraceFunctional(spec, eps, grid)
    return lambda lam: tf.evaluate(lam).phi


def solve_bound_state(
    spec: PotentialSpec,
    eps: float,
    grid: QuadratureGrid | None,
    tol: float = 1e-14,
    phi_func: PhiFunc | None = None,
) -> BoundStateResult:
    """Locate the zero of g on [lambda_lo, M] by bracketed search in t = ln(lambda).

    ``phi_func`` replaces the Nystrom trace functional (used by tests).
    """
    if tol < 1e-14:
        raise ValueError("tol must be >= 1e-14")
    eps = check_eps(eps)
    phi = _phi_callable(spec, eps, grid, phi_func)
    lo, hi = lower_bracket(spec, eps), sup_bound_M(spec)
    try:
        lam_pred = predicted_lambda(spec, eps)
    except PotentialError:
        lam_pred = math.nan

    def g_of_t(t: float) -> float:
        return 1.0 + t * phi(math.exp(t))

    t_lo, t_hi = math.log(lo), math.log(hi)
    g_lo, g_hi = g_of_t(t_lo), g_of_t(t_hi)
    if not (g_lo < 0.0 < g_hi):
        raise BracketError(
            f"no bound-state bracket on [{lo:.3e}, {hi:.3g}] at eps={eps}: "
            f"g(lo)={g_lo:.3e}, g(hi)={g_hi:.3e}"
        )
    try:
        t_star, info = brentq(g_of_t, t_lo, t_hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                              maxiter=200, full_output=True)
    except RuntimeError as exc:
        raise ConvergenceError(f"root search failed at eps={eps}: {exc}") from exc
    residual = abs(g_of_t(t_star))
    if residual > G_RESIDUAL_TOL:
        raise ConvergenceError(
            f"g residual {residual:.3e} at lambda={math.exp(t_star):.12e} after "
            f"{info.iterations} iterations (eps={eps})"
        )
    lam = math.exp(t_star)
    log.debug("eps=%g lambda*=%.12e iterations=%d", eps, lam, info.iterations)
    return BoundStateResult(lam, -lam * lam, lam_pred, residual, (lo, hi), info.iterations)


def scan_g(spec, eps, grid, n_samples: int = 200, phi_func: PhiFunc | None = None):
    """(lambda samples, g values, phi values) on a log grid from lambda_lo to M."""
    if n_samples < 50:
        raise ValueError("n_samples must be >= 50")
    eps = check_eps(eps)
    phi = _phi_callable(spec, eps, grid, phi_func)
    lams = np.geomspace(lower_bracket(spec, eps), sup_bound_M(spec), n_samples)
    phis = np.array([phi(float(x)) for x in lams])
    return lams, 1.0 + np.log(lams) * phis, phis


def count_sign_changes(values) -> int:
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def uniqueness_scan(spec, eps, grid, n_samples: int = 200, phi_func: PhiFunc | None = None) -> int:
    """Number of sign changes of g along the scan; one means a unique bound state."""
    _, g, _ = scan_g(spec, eps, grid, n_samples, phi_func)
    return count_sign_changes(g)
