"""Modified Fredholm determinants, the trace functional phi_V and cross terms.

phi_V(lambda) = tr((I + L_V)^{-1} Pi_V) is evaluated with one dense linear
solve. Pi_V only sees nodes where V != 0, and rows of L_V at those nodes only
involve columns at those nodes, so the solve is restricted to that block
without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .nystrom import (
    DiscreteOperator,
    QuadratureGrid,
    active_nodes,
    assemble_K_V,
    assemble_L_V,
    kernel_table,
    node_values,
    toeplitz_expand,
)
from .potential import (
    PotentialError,
    PotentialSpec,
    check_eps,
    check_fft_resolution,
    fourier_grid,
)
from .specfun import TWO_PI

DET2_MAX_DIM = 6400
SOLVE_RESIDUAL_TOL = 1e-10
REGULARIZATION = "Psi(z) = (1+z)exp(-z) - 1"


class SolveError(RuntimeError):
    """I + L_V(lambda) is numerically singular at this (eps, lambda)."""


@dataclass(frozen=True)
class TraceValue:
    phi: float
    lam: float
    condition_estimate: float


@dataclass(frozen=True)
class DeterminantValue:
    value: float
    regularization: str = REGULARIZATION


def det2(op, weights=None) -> DeterminantValue:
    """prod_i (1 + mu_i) exp(-mu_i) over the eigenvalues of the operator matrix.

    The matrix is first symmetrised by the quadrature weights,
    W^{1/2} A W^{-1/2}, which leaves the spectrum unchanged.
    """
    if isinstance(op, DiscreteOperator):
        A = op.matrix
        if weights is None:
            weights = op.grid.weights
    else:
        A = np.asarray(op, dtype=float)
    n = A.shape[0]
    if n > DET2_MAX_DIM:
        raise ValueError(f"det2 limited to dimension {DET2_MAX_DIM}, got {n}; use a coarser grid")
    if weights is not None:
        s = np.sqrt(np.asarray(weights, dtype=float))
        A = (s[:, None] * A) / s[None, :]
    mu = sla.eigvals(A, overwrite_a=weights is not None, check_finite=False)
    with np.errstate(divide="ignore"):
        logs = np.log(1.0 + mu) - mu
    total = np.sum(logs)
    if not np.isfinite(total.real):
        return DeterminantValue(0.0)
    val = np.exp(total)
    if abs(val.imag) > 1e-10 * abs(val):
        raise ArithmeticError(f"det2 has non-negligible imaginary part {val.imag:.3e}")
    return DeterminantValue(float(val.real))


class TraceFunctional:
    """phi_V(lambda) on a fixed grid, reusing node data across many lambda."""

    def __init__(self, spec: PotentialSpec, eps: float, grid: QuadratureGrid):
        self.spec = spec
        self.eps = check_eps(eps)
        self.grid = grid
        rho, v = node_values(spec, eps, grid)
        self.active = active_nodes(v)
        self.rho = rho[self.active]
        self.vw = (v * grid.weights)[self.active]
        self.rho_v = float(np.dot(self.rho, self.vw))

    def block(self, lam: float) -> np.ndarray:
        """L_V(lambda) restricted to the active nodes."""
        G = toeplitz_expand(kernel_table(lam, self.grid), self.active, self.active)
        G *= self.rho[:, None]
        G *= self.vw[None, :]
        return G

    def _solve(self, M: np.ndarray, rhs: np.ndarray, lam: float):
        lu, piv = sla.lu_factor(M, check_finite=False)
        x = sla.lu_solve((lu, piv), rhs, check_finite=False)
        res = np.linalg.norm(M @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.isfinite(res) or res > SOLVE_RESIDUAL_TOL:
            raise SolveError(
                f"I + L_V solve residual {res:.2e} at lambda={lam:.6g}, eps={self.eps} "
                "(Neumann regime not reached)"
            )
        anorm = np.abs(M).sum(axis=0).max()
        rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
        return x, (1.0 / rcond if rcond > 0 else math.inf)

    def evaluate(self, lam: float) -> TraceValue:
        if lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.active.size == 0:
            return TraceValue(0.0, float(lam), 1.0)
        L = self.block(lam)
        M = L + np.eye(L.shape[0])
        f, cond = self._solve(M, self.rho, lam)
        Lf = L @ f
        phi = (-self.rho_v + float(np.dot(Lf, self.vw))) / TWO_PI
        return TraceValue(float(phi), float(lam), float(cond))

    __call__ = evaluate

    def born(self, lam: float, order: int) -> float:
        if order not in (0, 1, 2):
            raise ValueError("Born order must be 0, 1 or 2")
        if self.active.size == 0:
            return 0.0
        out = -self.rho_v
        if order == 0:
            return out / TWO_PI
        L = self.block(lam)
        Lrho = L @ self.rho
        out += float(np.dot(Lrho, self.vw))
        if order == 2:
            u, _ = self._solve(L + np.eye(L.shape[0]), Lrho, lam)
            out -= float(np.dot(L @ u, self.vw))
        return out / TWO_PI


def phi_V(spec: PotentialSpec, eps: float, lam: float, grid: QuadratureGrid) -> TraceValue:
    """tr((I + L_V(lambda))^{-1} Pi_V) = (-<rho, V> + <L_V f, V>) / 2pi with (I + L_V) f = rho."""
    return TraceFunctional(spec, eps, grid).evaluate(lam)


def born_phi(spec: PotentialSpec, eps: float, lam: float, grid: QuadratureGrid, order: int) -> float:
    """Finite Born expansion of phi_V; order 2 carries the exact remainder and equals phi_V."""
    return TraceFunctional(spec, eps, grid).born(lam, order)


def eigencondition(spec: PotentialSpec, eps: float, lam: float, grid: QuadratureGrid) -> float:
    """g(lambda) = 1 + ln(lambda) phi_V(lambda); bound states solve g = 0."""
    if not lam > 0:
        raise ValueError("eigencondition needs lambda > 0")
    return 1.0 + math.log(lam) * phi_V(spec, eps, lam, grid).phi


def det_identity_residual(spec: PotentialSpec, eps: float, lam: float, grid: QuadratureGrid) -> float:
    """Relative mismatch in lambda^alpha D_V = d_V (1 + ln(lambda) phi_V)."""
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    _, v = node_values(spec, eps, grid)
    alpha = -float(np.sum(v * grid.weights)) / TWO_PI
    D = det2(assemble_K_V(spec, eps, lam, grid)).value
    d = det2(assemble_L_V(spec, eps, lam, grid)).value
    phi = phi_V(spec, eps, lam, grid).phi
    rhs = d * (1.0 + math.log(lam) * phi)
    return abs(lam**alpha * D - rhs) / (abs(rhs) + 1e-300)


def _find_mode(spec: PotentialSpec, k):
    k = (int(k[0]), int(k[1]))
    for m in spec.modes:
        if m.k == k:
            return m
    raise PotentialError(f"mode {k} not present in the potential")


def cross_term_integral(
    spec: PotentialSpec,
    eps: float,
    lam: float,
    k,
    l,
    box_half_width: float | None = None,
    n_fft: int | None = None,
) -> complex:
    """I[W_k, W_l] = int W_k^(xi - k/eps) W_l^(-xi - l/eps) / (|xi|^2 + lambda^2) dxi.

    The pairing is resonant for k + l = 0, where eps^-2 I tends to
    <W_k, conj(W_-k)> / |k|^2. Both shifted transforms are obtained as DFTs
    of the modulated modes W(x) exp(i k.x/eps) on a periodic box, and the
    xi integral is the matching lattice sum.
    """
    eps = check_eps(eps)
    if not 1.0 <= lam <= 2.0:
        raise ValueError("cross_term_integral is defined for lambda in [1, 2]")
    mk, ml = _find_mode(spec, k), _find_mode(spec, l)
    kmax = max(mk.knorm, ml.knorm)
    B = spec.L + 14.0 / lam if box_half_width is None else float(box_half_width)
    if n_fft is None:
        r0 = min(mk.profile.support_radius, ml.profile.support_radius)
        h_target = min(2.0 * math.pi * eps / (16.0 * kmax), r0 / 32.0)
        n_fft = int(2 ** math.ceil(math.log2(2.0 * B / h_target)))
    check_fft_resolution(spec, eps, B, n_fft)
    h = 2.0 * B / n_fft
    dxi = 2.0 * math.pi / (n_fft * h)
    if dxi > lam / 4.0:
        raise ValueError(f"xi spacing {dxi:.3g} too coarse for lambda={lam}; enlarge the box")
    c = -B + h * np.arange(n_fft)
    X, Y = np.meshgrid(c, c, indexing="ij")
    R = np.hypot(X, Y)

    def shifted_hat(mode):
        u = mode.c * mode.profile(R) * np.exp(1j * (mode.k[0] * X + mode.k[1] * Y) / eps)
        return np.fft.fft2(u)

    Uk = shifted_hat(mk)
    Ul = shifted_hat(ml)
    # value at -xi_m sits at index -m mod n; the box phase factors cancel in the product
    Ul_neg = np.roll(Ul[::-1, ::-1], 1, axis=(0, 1))
    weight = 1.0 / (fourier_grid(n_fft, h) + lam * lam)
    total = np.sum(Uk * Ul_neg * weight) * (h * h / TWO_PI) ** 2 * dxi * dxi
    return complex(total)
