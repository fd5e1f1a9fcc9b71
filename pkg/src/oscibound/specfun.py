"""Free-resolvent kernel of (-Delta + lambda^2)^{-1} in two dimensions.

The kernel is (1/2pi) K0(lambda r). It splits as

    R0(lambda, r) = -(1/2pi) ln(lambda) + H0(lambda, r)
    H0(lambda, r) = -(1/2pi) ln(r) + F(lambda r)

where F is continuous at 0. K0 is evaluated in-repo: the ascending series
for z <= 2 and Temme's continued fraction (Steed's algorithm) above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061
LN2 = 0.69314718055994530942
TWO_PI = 2.0 * math.pi

K0_MIN_ARG = 1e-10
K0_MAX_ARG = 700.0

# F(0) = (ln 2 - gamma) / (2 pi)
F_AT_ZERO = (LN2 - EULER_GAMMA) / TWO_PI

# mean of ln|y| over the unit square [-1/2, 1/2]^2
LOG_CELL_CONSTANT = math.pi / 4.0 - 1.5 - 0.5 * LN2

_SERIES_TERMS = 30
_CF_MAXIT = 10_000
_CF_EPS = 1e-16


class KernelRangeError(ValueError):
    """Argument outside the supported evaluation range."""


def _series_parts(z):
    """Return (I0(z) - 1, sum_{k>=1} (z^2/4)^k/(k!)^2 H_k) for small z."""
    q = 0.25 * z * z
    term = np.ones_like(z)
    harmonic = 0.0
    i0m1 = np.zeros_like(z)
    tail = np.zeros_like(z)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        harmonic += 1.0 / k
        i0m1 = i0m1 + term
        tail = tail + term * harmonic
    return i0m1, tail


def _k0_series(z):
    i0m1, tail = _series_parts(z)
    return -(np.log(0.5 * z) + EULER_GAMMA) * (1.0 + i0m1) + tail


def _k0_steed(x):
    # Temme's CF2 for nu = 0, vectorised; converges for x >= 2.
    x = np.asarray(x, dtype=float)
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    done = np.zeros(x.shape, dtype=bool)
    for i in range(2, _CF_MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = np.where(done, s, s + dels)
        done |= np.abs(dels / s) < _CF_EPS
        if done.all():
            break
    else:  # pragma: no cover - CF2 converges in < 100 steps for x >= 2
        raise RuntimeError("K0 continued fraction did not converge")
    return np.sqrt(math.pi / (2.0 * x)) * np.exp(-x) / s


def bessel_K0(z):
    """Modified Bessel function of the second kind, order zero.

    Accepts a scalar or array with every entry in [1e-10, 700]; returns
    the same shape. Relative error is below 1e-13 over that range.
    """
    arr = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < K0_MIN_ARG) or np.any(arr > K0_MAX_ARG):
        raise KernelRangeError(
            f"bessel_K0 argument outside [{K0_MIN_ARG}, {K0_MAX_ARG}]"
        )
    out = np.empty_like(arr)
    small = arr <= 2.0
    if np.any(small):
        out[small] = _k0_series(arr[small])
    if np.any(~small):
        out[~small] = _k0_steed(arr[~small])
    return out if out.ndim else float(out)


def kernel_F(zeta):
    """Smooth remainder F(zeta) = (K0(zeta) + ln zeta) / (2 pi), F(0) = (ln2 - gamma)/(2 pi)."""
    arr = np.asarray(zeta, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise KernelRangeError("kernel_F requires zeta >= 0")
    out = np.empty_like(arr)
    small = arr <= 2.0
    if np.any(small):
        zs = arr[small]
        i0m1, tail = _series_parts(zs)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_part = np.where(zs > 0, (np.log(0.5 * np.where(zs > 0, zs, 1.0)) + EULER_GAMMA) * i0m1, 0.0)
        out[small] = (LN2 - EULER_GAMMA - log_part + tail) / TWO_PI
    mid = (arr > 2.0) & (arr <= K0_MAX_ARG)
    if np.any(mid):
        out[mid] = (_k0_steed(arr[mid]) + np.log(arr[mid])) / TWO_PI
    big = arr > K0_MAX_ARG
    if np.any(big):
        # K0 < 1e-305 here
        out[big] = np.log(arr[big]) / TWO_PI
    return out if out.ndim else float(out)


def kernel_H0(lam, r):
    """Regular part H0(lambda, r) of the resolvent kernel, continuous down to lambda = 0."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise KernelRangeError("kernel_H0 requires r > 0")
    if np.any(np.asarray(lam) < 0):
        raise KernelRangeError("kernel_H0 requires lambda >= 0")
    out = -np.log(r_arr) / TWO_PI + kernel_F(np.asarray(lam, dtype=float) * r_arr)
    return out if np.ndim(out) else float(out)


def resolvent_kernel_R0(lam, r):
    """Kernel (1/2 pi) K0(lambda r) of (-Delta + lambda^2)^{-1}."""
    if np.any(np.asarray(lam) <= 0) or np.any(np.asarray(r) <= 0):
        raise KernelRangeError("resolvent_kernel_R0 requires lambda > 0 and r > 0")
    out = np.asarray(bessel_K0(np.asarray(lam, dtype=float) * np.asarray(r, dtype=float))) / TWO_PI
    return out if out.ndim else float(out)


def log_cell_integral(h: float) -> float:
    """Integral of ln|y| over the square cell [-h/2, h/2]^2."""
    if not h > 0:
        raise ValueError("cell side must be positive")
    return h * h * (LOG_CELL_CONSTANT + math.log(h))


@dataclass(frozen=True)
class KernelSplit:
    """The three kernel pieces at a fixed spectral parameter."""

    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise KernelRangeError("spectral parameter must be >= 0")

    def R0(self, r):
        return resolvent_kernel_R0(self.lam, r)

    def H0(self, r):
        return kernel_H0(self.lam, r)

    def F(self, zeta):
        return kernel_F(zeta)
