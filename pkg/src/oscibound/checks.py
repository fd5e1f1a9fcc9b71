"""Pass/fail criteria shared by ``oscibound verify`` and the acceptance tests."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from . import specfun
from .fredholm import TraceFunctional, cross_term_integral, det_identity_residual
from .nystrom import build_grid
from .oracle import FDConfig, dense_phi_oracle, direct_eigensolve, h_minus2_sandwich_norm
from .potential import (
    BumpProfile,
    PotentialSpec,
    integral_lambda0,
    profile_l2_squared,
    single_pair_spec,
    sobolev_minus2_norm,
    sup_bound_M,
)
from .rootfind import predicted_lambda, solve_bound_state, uniqueness_scan

EPS_SWEEP = (0.5, 0.35, 0.25, 0.18)
LAMBDA_WINDOW = (1.0, 1.25, 1.5, 1.75, 2.0)
AUTO_SIZES = (32, 48, 64, 96)
SOLVE_GRID_CAP = 96
DET_GRID_CAP = 48


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str
    threshold: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.measured} (need {self.threshold})"

    def to_dict(self) -> dict:
        return asdict(self)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def auto_grid_size(spec: PotentialSpec, eps: float, cap: int = SOLVE_GRID_CAP) -> int:
    """Smallest admissible n rounded up to one of 32/48/64/96, capped."""
    from .nystrom import GridResolutionError, required_n

    need = required_n(spec, eps)
    for n in AUTO_SIZES:
        if n >= need and n <= cap:
            return n
    raise GridResolutionError(f"eps={eps} needs n_per_side >= {need}, above the cap {cap}")


def loglog_slope(eps, values) -> float:
    return float(np.polyfit(np.log(eps), np.log(np.abs(values)), 1)[0])


def is_non_increasing(seq) -> bool:
    return all(b <= a for a, b in zip(seq, seq[1:]))


def k0_integral(z: float) -> float:
    """K0(z) = int_0^inf exp(-z cosh t) dt, scaled by e^z to avoid underflow."""
    t_max = math.acosh(1.0 + 760.0 / z)
    val, _ = quad(lambda t: math.exp(-2.0 * z * math.sinh(0.5 * t) ** 2), 0.0, t_max,
                  epsabs=0.0, epsrel=1e-13, limit=400)
    return val * math.exp(-z)


def tuned_sine_pair(eps: float = 0.35, lam_target: float = 0.075) -> PotentialSpec:
    """S1 geometry with an imaginary amplitude scaled so the prediction hits lam_target."""
    unit = single_pair_spec(amplitude=1j)
    a = math.sqrt(2.0 * math.pi / (eps * eps * -math.log(lam_target) * integral_lambda0(unit)))
    return single_pair_spec(amplitude=1j * a)


def two_pair_spec(L: float = 2.0) -> PotentialSpec:
    p = BumpProfile(L)
    return PotentialSpec.from_modes(L, [((1, 0), 1.0, p), ((1, 1), 0.5, p)])


@_timed
def criterion_a1(n: int = 64) -> CheckResult:
    spec = single_pair_spec()
    total = integral_lambda0(spec)
    devs = []
    for eps in EPS_SWEEP:
        tf = TraceFunctional(spec, eps, build_grid(spec, eps, n))
        devs.append(max(abs(2 * math.pi * tf(lam).phi / eps**2 - total) / total for lam in LAMBDA_WINDOW))
    ok = is_non_increasing(devs) and devs[-1] <= 0.15
    return CheckResult(
        "A1 phi asymptotic", ok,
        "max rel. deviation per eps " + ", ".join(f"{d:.3g}" for d in devs),
        "non-increasing and <= 0.15 at eps=0.18", {"eps": EPS_SWEEP, "deviation": devs},
    )


@_timed
def criterion_a2() -> CheckResult:
    spec = single_pair_spec()
    hm2 = [sobolev_minus2_norm(spec, e) for e in EPS_SWEEP]
    sand = [h_minus2_sandwich_norm(spec, e) for e in EPS_SWEEP]
    s1, s2 = loglog_slope(EPS_SWEEP, hm2), loglog_slope(EPS_SWEEP, sand)
    ok = 1.7 <= s1 <= 2.3 and 1.7 <= s2 <= 2.3
    return CheckResult(
        "A2 H^-2 scaling", ok, f"slopes {s1:.3f} (H^-2 norm), {s2:.3f} (sandwich)", "both in [1.7, 2.3]",
        {"hm2": hm2, "sandwich": sand},
    )


@_timed
def criterion_a3(seed: int = 0, n: int = 32, pairs: int = 6) -> CheckResult:
    spec = single_pair_spec()
    rng = np.random.default_rng(seed)
    lams = np.exp(rng.uniform(math.log(0.05), math.log(sup_bound_M(spec)), pairs))
    epss = rng.uniform(min(EPS_SWEEP), max(EPS_SWEEP), pairs)
    res = [det_identity_residual(spec, float(e), float(lam), build_grid(spec, float(e), n))
           for lam, e in zip(lams, epss)]
    worst = max(res)
    return CheckResult(
        "A3 determinant factorization", worst <= 1e-8, f"max residual {worst:.2e}", "<= 1e-8",
        {"lambda": lams.tolist(), "eps": epss.tolist(), "residual": res},
    )


@_timed
def criterion_a4() -> CheckResult:
    spec = single_pair_spec()
    eps_set = (0.35, 0.25, 0.18)
    errs, resid, notes = [], [], []
    for eps in eps_set:
        grid = build_grid(spec, eps, auto_grid_size(spec, eps))
        target = 2 * math.pi / (eps**2 * integral_lambda0(spec))
        try:
            r = solve_bound_state(spec, eps, grid)
        except Exception as exc:
            errs.append(math.inf)
            resid.append(math.inf)
            notes.append(str(exc))
            continue
        tf = TraceFunctional(spec, eps, grid)
        resid.append(abs(1.0 / math.log(r.lambda_star) + tf(r.lambda_star).phi))
        errs.append(abs(abs(math.log(r.lambda_star)) - target) / target)
        notes.append("")
    ok = max(resid) <= 1e-12 and errs[1] <= 0.25 and is_non_increasing(errs)
    return CheckResult(
        "A4 root consistency", ok,
        "ln-lambda error per eps "
        + ", ".join("no bracket" if note else f"{e:.3g}" for e, note in zip(errs, notes))
        + (f"; max residual {max(resid):.2e}" if all(map(math.isfinite, resid)) else ""),
        "residual <= 1e-12, error <= 0.25 at eps=0.25, non-increasing",
        {"eps": eps_set, "error": errs, "residual": resid, "notes": notes},
    )


@_timed
def criterion_a5(n: int = 64, cfg: FDConfig | None = None) -> CheckResult:
    eps = 0.35
    spec = tuned_sine_pair(eps)
    lam_pred = predicted_lambda(spec, eps)
    r = solve_bound_state(spec, eps, build_grid(spec, eps, n))
    cfg = cfg or FDConfig(R=80.0, m_per_side=120, core_half_width=1.5)
    ora = direct_eigensolve(spec, eps, cfg)
    if ora is None:
        return CheckResult("A5 independent oracle", False, "oracle found no bound state", "gap <= 10%")
    gap = abs(ora.E - r.energy) / abs(ora.E)
    ok = 0.05 <= lam_pred <= 0.1 and gap <= 0.10
    return CheckResult(
        "A5 independent oracle", ok,
        f"E_nystrom={r.energy:.6e}, E_fd={ora.E:.6e}, gap {gap:.2%}, lambda_pred={lam_pred:.4f}",
        "gap <= 10% with lambda_pred in [0.05, 0.1]",
        {"E_nystrom": r.energy, "E_fd": ora.E, "truncation_flag": ora.truncation_flag, "gap": gap},
    )


@_timed
def criterion_a6(n_samples: int = 200) -> CheckResult:
    spec = single_pair_spec()
    counts = []
    for eps in (0.35, 0.25, 0.18):
        counts.append(uniqueness_scan(spec, eps, build_grid(spec, eps, auto_grid_size(spec, eps)), n_samples))
    return CheckResult(
        "A6 uniqueness", all(c == 1 for c in counts), f"sign changes {counts}", "exactly 1 per eps",
        {"counts": counts},
    )


@_timed
def criterion_a7(lam: float = 1.5) -> CheckResult:
    spec = two_pair_spec()
    ks = [m.k for m in spec.modes]
    slopes = {}
    for k in ks:
        for l in ks:
            if k[0] + l[0] == 0 and k[1] + l[1] == 0:
                continue
            vals = [abs(cross_term_integral(spec, e, lam, k, l)) for e in EPS_SWEEP]
            slopes[f"{k}x{l}"] = loglog_slope(EPS_SWEEP, vals)
    lim_err = {}
    for m in spec.modes:
        limit = profile_l2_squared(m.profile) * abs(m.c) ** 2 / m.knorm**2
        val = cross_term_integral(spec, 0.18, lam, m.k, (-m.k[0], -m.k[1])).real / 0.18**2
        lim_err[str(m.k)] = abs(val - limit) / limit
    worst_slope, worst_lim = min(slopes.values()), max(lim_err.values())
    ok = worst_slope >= 2.2 and worst_lim <= 0.05
    return CheckResult(
        "A7 cross-term decay", ok, f"min slope {worst_slope:.2f}, max limit error {worst_lim:.2%}",
        "slope >= 2.2, limit within 5% at eps=0.18", {"slopes": slopes, "limit_error": lim_err},
    )


@_timed
def criterion_a8() -> CheckResult:
    spec = single_pair_spec()
    cases = ((0.35, 1.5), (0.5, 1.0), (0.25, 0.3), (0.18, 2.0))
    diffs = []
    for eps, lam in cases:
        grid = build_grid(spec, eps, 24)
        a = TraceFunctional(spec, eps, grid)(lam).phi
        b = dense_phi_oracle(spec, eps, lam, grid)
        diffs.append(abs(a - b) / max(abs(b), 1e-300))
    return CheckResult(
        "A8 solve vs explicit inverse", max(diffs) <= 1e-10, f"max rel. difference {max(diffs):.2e}",
        "<= 1e-10", {"cases": cases, "difference": diffs},
    )


@_timed
def criterion_a9(points: int = 100) -> CheckResult:
    zs = np.geomspace(1e-8, 700.0, points)
    errs = [abs(specfun.bessel_K0(z) / k0_integral(z) - 1.0) for z in zs]
    return CheckResult(
        "A9 Bessel K0", max(errs) <= 1e-10, f"max rel. error {max(errs):.2e} over {points} points",
        "<= 1e-10", {"worst_z": float(zs[int(np.argmax(errs))])},
    )


ACCEPTANCE = {
    "A1": criterion_a1,
    "A2": criterion_a2,
    "A3": criterion_a3,
    "A4": criterion_a4,
    "A5": criterion_a5,
    "A6": criterion_a6,
    "A7": criterion_a7,
    "A8": criterion_a8,
    "A9": criterion_a9,
}
