"""Oscillatory potentials V_eps(x) = sum_k W_k(x) exp(i k.x / eps).

Each Fourier mode is stored as W_k(x) = c_k * chi(|x|) with a radial bump
chi. Hermitian symmetry W_{-k} = conj(W_k) keeps V real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

SMOOTH_EXPONENTIAL = "smooth-exponential"
SMOOTHSTEP_C3 = "polynomial-smoothstep"
PROFILE_KINDS = (SMOOTH_EXPONENTIAL, SMOOTHSTEP_C3)

DEFAULT_CUTOFF_FACTOR = 1.1
_SYMMETRY_RTOL = 1e-12


class PotentialError(ValueError):
    """Invalid potential data."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


class AliasingError(ValueError):
    """Sampling grid too coarse for the oscillation scale."""


def check_eps(eps: float) -> float:
    eps = float(eps)
    if not (0.0 < eps <= 1.0):
        raise PotentialError(f"eps must lie in (0, 1], got {eps}")
    return eps


def _smooth_step(s):
    # C-infinity transition: 0 for s <= 0, 1 for s >= 1
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def _smootherstep7(t):
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump: 1 on |x| <= plateau_radius, 0 on |x| >= support_radius."""

    support_radius: float
    plateau_radius: float = 0.0
    kind: str = SMOOTH_EXPONENTIAL

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise PotentialError(f"unknown profile kind {self.kind!r}")
        if not (0.0 <= self.plateau_radius < self.support_radius):
            raise PotentialError("profile needs 0 <= plateau_radius < support_radius")

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        r0, r1 = self.support_radius, self.plateau_radius
        if self.kind == SMOOTHSTEP_C3:
            return _smootherstep7((r0 - r) / (r0 - r1))
        if r1 == 0.0:
            u = r / r0
            inside = u < 1.0
            safe = np.where(inside, u, 0.0)
            return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)
        return _smooth_step((r0 - r) / (r0 - r1))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "support_radius": self.support_radius,
            "plateau_radius": self.plateau_radius,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BumpProfile":
        try:
            return cls(
                support_radius=float(data["support_radius"]),
                plateau_radius=float(data.get("plateau_radius", 0.0)),
                kind=data.get("kind", SMOOTH_EXPONENTIAL),
            )
        except KeyError as exc:
            raise PotentialError(f"profile missing field {exc}") from None


@dataclass(frozen=True)
class Mode:
    k: tuple[int, int]
    c: complex
    profile: BumpProfile

    @property
    def knorm(self) -> float:
        return math.hypot(*self.k)


@dataclass(frozen=True)
class PotentialSpec:
    """Finite Hermitian-symmetric family of modes plus the cutoff rho.

    Use :meth:`from_modes` to have the -k partners filled in.
    """

    L: float
    modes: tuple[Mode, ...]
    cutoff: BumpProfile = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.L > 0:
            raise PotentialError("support radius L must be positive")
        if len(self.modes) == 0:
            raise PotentialError("no modes")
        seen = {}
        for m in self.modes:
            if len(m.k) != 2 or tuple(m.k) == (0, 0):
                raise PotentialError(f"mode index must be a nonzero integer pair, got {m.k}")
            if m.k in seen:
                raise PotentialError(f"duplicate mode {m.k}")
            if m.profile.support_radius > self.L * (1 + 1e-12):
                raise PotentialError(f"mode {m.k} profile extends beyond L={self.L}")
            seen[m.k] = m
        for m in self.modes:
            partner = seen.get((-m.k[0], -m.k[1]))
            if partner is None:
                raise PotentialError(f"mode {m.k} has no partner {(-m.k[0], -m.k[1])}")
            if partner.profile != m.profile or abs(partner.c - np.conj(m.c)) > _SYMMETRY_RTOL * max(1.0, abs(m.c)):
                raise PotentialError(f"modes {m.k} and its partner violate W_-k = conj(W_k)")
        if self.cutoff is None:
            object.__setattr__(
                self,
                "cutoff",
                BumpProfile(DEFAULT_CUTOFF_FACTOR * self.L, self.max_support, SMOOTH_EXPONENTIAL),
            )
        if self.cutoff.plateau_radius < self.max_support * (1 - 1e-12):
            raise PotentialError("cutoff plateau must cover every mode support")
        if not self.cutoff.support_radius > self.L:
            raise PotentialError("cutoff support radius must exceed L")

    @classmethod
    def from_modes(
        cls,
        L: float,
        modes: Iterable[tuple[Sequence[int], complex, BumpProfile]],
        cutoff: BumpProfile | None = None,
    ) -> "PotentialSpec":
        """Build a spec, adding the conjugate partner of any mode given alone."""
        table: dict[tuple[int, int], Mode] = {}
        for k, c, prof in modes:
            k = (int(k[0]), int(k[1]))
            if k in table:
                raise PotentialError(f"duplicate mode {k}")
            table[k] = Mode(k, complex(c), prof)
        for k, m in list(table.items()):
            mk = (-k[0], -k[1])
            if mk not in table:
                table[mk] = Mode(mk, complex(np.conj(m.c)), m.profile)
        return cls(L=float(L), modes=tuple(table.values()), cutoff=cutoff)

    @property
    def max_support(self) -> float:
        return max(m.profile.support_radius for m in self.modes)

    @property
    def cutoff_radius(self) -> float:
        return self.cutoff.support_radius

    @property
    def max_k(self) -> float:
        return max(m.knorm for m in self.modes)

    def scaled(self, factor: complex) -> "PotentialSpec":
        """Multiply every amplitude by ``factor`` (phase applied as c_k -> f c_k, c_-k -> conj(f) c_-k)."""
        new = []
        done = set()
        for m in self.modes:
            if m.k in done:
                continue
            new.append((m.k, factor * m.c, m.profile))
            done.add(m.k)
            done.add((-m.k[0], -m.k[1]))
        return PotentialSpec.from_modes(self.L, new, cutoff=self.cutoff)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "cutoff": self.cutoff.to_dict(),
            "modes": [
                {
                    "k": list(m.k),
                    "re": float(np.real(m.c)),
                    "im": float(np.imag(m.c)),
                    "profile": m.profile.to_dict(),
                }
                for m in self.modes
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialSpec":
        """Load the JSON document form; completes missing -k partners, rejects conflicts."""
        if "L" not in data:
            raise PotentialError("potential missing field 'L'")
        raw = data.get("modes")
        if not raw:
            raise PotentialError("no modes")
        table: dict[tuple[int, int], Mode] = {}
        for i, entry in enumerate(raw):
            try:
                k = tuple(int(v) for v in entry["k"])
                c = complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
                prof = BumpProfile.from_dict(entry["profile"])
            except (KeyError, TypeError, ValueError) as exc:
                raise PotentialError(f"modes[{i}]: {exc}") from None
            if k in table:
                raise PotentialError(f"modes[{i}]: duplicate mode {k}")
            table[k] = Mode(k, c, prof)
        for k, m in list(table.items()):
            mk = (-k[0], -k[1])
            if mk not in table:
                table[mk] = Mode(mk, complex(np.conj(m.c)), m.profile)
        cutoff = BumpProfile.from_dict(data["cutoff"]) if data.get("cutoff") else None
        return cls(L=float(data["L"]), modes=tuple(table.values()), cutoff=cutoff)


def single_pair_spec(
    amplitude: complex = 1.0,
    k: tuple[int, int] = (1, 0),
    L: float = 1.0,
    profile: BumpProfile | None = None,
) -> PotentialSpec:
    """One Hermitian pair +-k with W_k = amplitude * chi. Defaults give the S1 test potential."""
    prof = profile or BumpProfile(L, 0.0, SMOOTH_EXPONENTIAL)
    return PotentialSpec.from_modes(L, [(k, amplitude, prof)])


def _points(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of size 2")
    return x[..., 0], x[..., 1]


def evaluate_V(spec: PotentialSpec, eps: float, x) -> np.ndarray | float:
    """Real potential V_eps at points ``x`` (shape (..., 2))."""
    eps = check_eps(eps)
    x1, x2 = _points(x)
    r = np.hypot(x1, x2)
    total = np.zeros(np.shape(x1), dtype=complex)
    for m in spec.modes:
        phase = (m.k[0] * x1 + m.k[1] * x2) / eps
        total += m.c * m.profile(r) * np.exp(1j * phase)
    re = total.real
    if np.any(np.abs(total.imag) > 1e-12 * (1.0 + np.abs(re))):
        raise PotentialError("potential is not real; Hermitian symmetry broken")
    return re if re.ndim else float(re)


def evaluate_rho(spec: PotentialSpec, x) -> np.ndarray | float:
    x1, x2 = _points(x)
    out = spec.cutoff(np.hypot(x1, x2))
    return out if np.ndim(out) else float(out)


def lambda0(spec: PotentialSpec, x) -> np.ndarray | float:
    """Effective density sum_k |W_k(x)|^2 / |k|^2."""
    x1, x2 = _points(x)
    r = np.hypot(x1, x2)
    out = np.zeros(np.shape(r))
    for m in spec.modes:
        out += abs(m.c) ** 2 * m.profile(r) ** 2 / m.knorm**2
    return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def _profile_moment(profile: BumpProfile, power: int, tol: float) -> float:
    """2 pi * int_0^r0 chi(r)^power r dr with an adaptive rule."""
    r0, r1 = profile.support_radius, profile.plateau_radius
    plateau = math.pi * r1 * r1
    val, err = integrate.quad(
        lambda r: 2.0 * math.pi * r * float(profile(r)) ** power,
        r1,
        r0,
        epsabs=0.0,
        epsrel=tol,
        limit=500,
    )
    total = plateau + val
    if err > tol * max(abs(total), 1e-300):
        raise QuadratureError(
            f"profile quadrature reached only {err / max(abs(total), 1e-300):.2e} relative accuracy"
        )
    return total


def profile_l2_squared(profile: BumpProfile, tol: float = 1e-12) -> float:
    return _profile_moment(profile, 2, tol)


def integral_lambda0(spec: PotentialSpec, tol: float = 1e-10) -> float:
    """Integral of the effective density over the plane.

    Lambda_0 is radial here, so each mode reduces to a 1D adaptive radial
    integral of chi^2.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    return float(
        sum(abs(m.c) ** 2 / m.knorm**2 * _profile_moment(m.profile, 2, tol) for m in spec.modes)
    )


def sup_bound_M(spec: PotentialSpec) -> float:
    """M = 2 + sum_k |W_k|_inf. Bumps peak at 1, so |W_k|_inf = |c_k|."""
    return 2.0 + float(sum(abs(m.c) for m in spec.modes))


# central-difference stencils: (offsets, weights) for derivative orders 0..3
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def profile_derivative_sups(
    profile: BumpProfile, extent: float, n_grid: int = 256, step: float = 1e-4
) -> list[float]:
    """sup over the plane of max_{|alpha|=j} |d^alpha chi(|x|)| for j = 0..3.

    Mixed partials come from tensor central differences on an n_grid^2
    sample grid over [-extent, extent]^2.
    """
    c = np.linspace(-extent, extent, n_grid)
    X, Y = np.meshgrid(c, c, indexing="ij")
    sups = []
    for order in range(4):
        best = 0.0
        for a in range(order + 1):
            b = order - a
            offs_a, w_a = _STENCILS[a]
            offs_b, w_b = _STENCILS[b]
            acc = np.zeros_like(X)
            for oa, wa in zip(offs_a, w_a):
                for ob, wb in zip(offs_b, w_b):
                    acc += wa * wb * profile(np.hypot(X + oa * step, Y + ob * step))
            best = max(best, float(np.max(np.abs(acc))) / step**order)
        sups.append(best)
    return sups


def mode_cn_norms(spec: PotentialSpec, n_grid: int = 256, step: float = 1e-4) -> dict:
    """|W_k|_{C^n} for n = 0..3, with |f|_{C^n} = sum_{j<=n} |f^(j)|_inf."""
    cache: dict[BumpProfile, list[float]] = {}
    out = {}
    for m in spec.modes:
        if m.profile not in cache:
            cache[m.profile] = profile_derivative_sups(m.profile, spec.L, n_grid, step)
        sups = abs(m.c) * np.asarray(cache[m.profile])
        out[m.k] = np.cumsum(sups)
    return out


def regularity_functional(spec: PotentialSpec, n_grid: int = 256, step: float = 1e-4) -> float:
    """Diagnostic sum of C^n seminorms that controls the asymptotics (finite for finite mode sets)."""
    norms = mode_cn_norms(spec, n_grid, step)
    total = 0.0
    for m in spec.modes:
        cn = norms[m.k]
        kn = m.knorm
        total += cn[0] + cn[1] / kn + cn[2] / kn**2 + cn[3] / kn**3
    for m in spec.modes:
        for l in spec.modes:
            if l.k == m.k:
                continue
            dist = math.hypot(m.k[0] - l.k[0], m.k[1] - l.k[1])
            total += norms[m.k][3] * norms[l.k][3] / dist**2.5
    return float(total)


def periodic_samples(spec: PotentialSpec, eps: float, box_half_width: float, n: int):
    """V sampled at x_j = -B + j h on the periodic box; returns (values, h)."""
    h = 2.0 * box_half_width / n
    c = -box_half_width + h * np.arange(n)
    X, Y = np.meshgrid(c, c, indexing="ij")
    return evaluate_V(spec, eps, np.stack([X, Y], axis=-1)), h


def fourier_grid(n: int, h: float):
    """Angular frequencies of an n-point DFT with spacing h, as a 2D |xi|^2 array."""
    f = 2.0 * math.pi * np.fft.fftfreq(n, d=h)
    return f[:, None] ** 2 + f[None, :] ** 2


def check_fft_resolution(spec: PotentialSpec, eps: float, box_half_width: float, n_fft: int):
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise AliasingError(f"n_fft must be a power of two, got {n_fft}")
    if box_half_width < spec.L:
        raise AliasingError("box must contain the support of V")
    h = 2.0 * box_half_width / n_fft
    h_max = 2.0 * math.pi * eps / (8.0 * spec.max_k)
    if h > h_max:
        need = 2.0 * box_half_width / h_max
        raise AliasingError(
            f"n_fft={n_fft} gives spacing {h:.4g} > {h_max:.4g}; need n_fft >= {need:.0f}"
        )


def default_fft_size(spec: PotentialSpec, eps: float, box_half_width: float) -> int:
    h_target = min(2.0 * math.pi * eps / (16.0 * spec.max_k), spec.max_support / 24.0)
    n = 2.0 * box_half_width / h_target
    return int(2 ** math.ceil(math.log2(n)))


def sobolev_minus2_norm(
    spec: PotentialSpec,
    eps: float,
    box_half_width: float | None = None,
    n_fft: int | None = None,
) -> float:
    """|V|_{H^-2} = | <xi>^-2 V^ |_2 with V^(xi) = (1/2pi) int e^{-ix.xi} V(x) dx.

    Computed from a DFT of V on a periodic box; the box must leave a margin
    of several units around the support for the Bessel-potential tails.
    """
    eps = check_eps(eps)
    B = spec.L + 8.0 if box_half_width is None else float(box_half_width)
    n = default_fft_size(spec, eps, B) if n_fft is None else int(n_fft)
    check_fft_resolution(spec, eps, B, n)
    v, h = periodic_samples(spec, eps, B, n)
    vhat = np.fft.fft2(v) * (h * h / (2.0 * math.pi))
    dxi = 2.0 * math.pi / (n * h)
    weight = 1.0 / (1.0 + fourier_grid(n, h)) ** 2
    return float(math.sqrt(np.sum(np.abs(vhat) ** 2 * weight)) * dxi)
