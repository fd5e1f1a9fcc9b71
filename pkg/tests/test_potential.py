import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscibound.potential import (
    SMOOTHSTEP_C3,
    AliasingError,
    BumpProfile,
    Mode,
    PotentialError,
    PotentialSpec,
    evaluate_V,
    evaluate_rho,
    integral_lambda0,
    lambda0,
    mode_cn_norms,
    profile_l2_squared,
    regularity_functional,
    single_pair_spec,
    sobolev_minus2_norm,
    sup_bound_M,
)

amplitudes = st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False,
                                 allow_subnormal=False)


def test_s1_centre_value(s1):
    assert evaluate_V(s1, 0.3, (0.0, 0.0)) == pytest.approx(2.0)
    A = 2.5
    assert evaluate_V(single_pair_spec(A), 0.3, (0.0, 0.0)) == pytest.approx(2 * A)


def test_s1_pointwise_value(s1):
    chi_half = math.exp(1 - 1 / (1 - 0.25))  # = exp(-1/3)
    assert evaluate_V(s1, 0.25, (0.5, 0.0)) == pytest.approx(2 * chi_half * math.cos(2.0), rel=1e-14)


def test_sine_phase(s1_sine):
    x = (0.3, -0.2)
    chi = BumpProfile(1.0)(math.hypot(*x))
    assert evaluate_V(s1_sine, 0.2, x) == pytest.approx(-2 * chi * math.sin(0.3 / 0.2), rel=1e-13)


@pytest.mark.parametrize("x", [(1.0, 0.0), (0.8, 0.7), (-3.0, 2.0)])
def test_compact_support(s1, two_pair, x):
    assert evaluate_V(s1, 0.4, x) == 0.0
    assert evaluate_V(two_pair, 0.4, x) == 0.0
    assert lambda0(s1, x) == 0.0


@settings(max_examples=40, deadline=None)
@given(c1=amplitudes, c2=amplitudes, eps=st.floats(0.05, 1.0), seed=st.integers(0, 2**31))
def test_V_real_and_bounded(c1, c2, eps, seed):
    p = BumpProfile(1.0, 0.3)
    spec = PotentialSpec.from_modes(1.0, [((1, 0), c1, p), ((2, -1), c2, p)])
    pts = np.random.default_rng(seed).uniform(-1.2, 1.2, size=(1000, 2))
    v = evaluate_V(spec, eps, pts)  # raises if the imaginary residue exceeds 1e-12 (1 + |V|)
    assert np.all(np.abs(v) <= 2 * (abs(c1) + abs(c2)) * (1 + 1e-12))


def test_lambda0_values(s1):
    A = 1.7
    s = single_pair_spec(A)
    assert lambda0(s, (0.0, 0.0)) == pytest.approx(2 * A * A)
    chi = BumpProfile(1.0)(0.5)
    assert lambda0(s, (0.5, 0.0)) == pytest.approx(2 * A * A * chi * chi)


@given(st.lists(st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)), min_size=1, max_size=20))
def test_lambda0_nonnegative(pts):
    assert np.all(lambda0(single_pair_spec(0.7 + 0.2j), np.array(pts)) >= 0)


def _gauss_radial_l2(profile, n=400):
    # fixed high-order Gauss-Legendre rule, split at the plateau edge
    x, w = np.polynomial.legendre.leggauss(n)
    total = 0.0
    for a, b in ((0.0, profile.plateau_radius), (profile.plateau_radius, profile.support_radius)):
        if b <= a:
            continue
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.sum(w * 2 * np.pi * r * profile(r) ** 2)
    return total


@pytest.mark.parametrize("prof", [BumpProfile(1.0), BumpProfile(1.0, 0.4), BumpProfile(1.0, 0.5, SMOOTHSTEP_C3)])
def test_profile_l2_against_gauss(prof):
    assert profile_l2_squared(prof) == pytest.approx(_gauss_radial_l2(prof), rel=1e-8)


def test_integral_lambda0_s1(s1):
    assert integral_lambda0(s1) == pytest.approx(2 * _gauss_radial_l2(BumpProfile(1.0)), rel=1e-8)


def test_integral_lambda0_two_pairs(s1, two_pair):
    single = integral_lambda0(s1) / 2
    # |k|^2 = 1 and 2, amplitudes 1 and 0.5, two modes each
    assert integral_lambda0(two_pair) == pytest.approx(2 * single * (1 + 0.25 / 2), rel=1e-10)


@given(c=amplitudes.filter(lambda c: abs(c) > 1e-3), f=st.floats(0.1, 10))
def test_integral_lambda0_quadratic(c, f):
    s = single_pair_spec(c)
    assert integral_lambda0(s.scaled(f)) == pytest.approx(f * f * integral_lambda0(s), rel=1e-10)


def test_integral_lambda0_relabel_invariant():
    p = BumpProfile(1.0)
    a = PotentialSpec.from_modes(1.0, [((1, 2), 0.3 + 0.4j, p)])
    b = PotentialSpec.from_modes(1.0, [((-1, -2), 0.3 - 0.4j, p)])
    assert integral_lambda0(a) == pytest.approx(integral_lambda0(b), rel=1e-14)


def test_sup_bound_M(two_pair):
    assert sup_bound_M(single_pair_spec()) == 4.0
    assert sup_bound_M(single_pair_spec(3.0)) == 8.0
    assert sup_bound_M(two_pair) == 5.0


def test_regularity_functional_homogeneity(s1):
    base = regularity_functional(s1, n_grid=128)
    small = regularity_functional(s1.scaled(1e-3), n_grid=128)
    doubled = regularity_functional(s1.scaled(2.0), n_grid=128)
    assert small < 2e-3 * base
    assert 2.0 * base * (1 - 1e-9) <= doubled <= 4.0 * base * (1 + 1e-9)


def test_regularity_functional_term_count(s1):
    cn = mode_cn_norms(s1, n_grid=128)[(1, 0)]
    expected = 2 * (cn[0] + cn[1] + cn[2] + cn[3]) + 2 * cn[3] ** 2 / 2**2.5
    assert regularity_functional(s1, n_grid=128) == pytest.approx(expected, rel=1e-12)


def test_c0_norm_is_amplitude(s1):
    assert mode_cn_norms(single_pair_spec(2.0), n_grid=129)[(1, 0)][0] == pytest.approx(2.0, rel=1e-9)


def test_sobolev_norm_zero_and_linear(silent_spec, s1):
    assert sobolev_minus2_norm(silent_spec, 0.35) == 0.0
    a = sobolev_minus2_norm(s1, 0.35)
    assert sobolev_minus2_norm(s1.scaled(2.0), 0.35) == pytest.approx(2 * a, rel=1e-12)


def test_sobolev_norm_box_independent(s1):
    a = sobolev_minus2_norm(s1, 0.35, box_half_width=9.0, n_fft=512)
    b = sobolev_minus2_norm(s1, 0.35, box_half_width=18.0, n_fft=1024)
    assert a == pytest.approx(b, rel=1e-6)


def test_sobolev_norm_slope(s1):
    eps = np.array([0.5, 0.35, 0.25, 0.18])
    vals = [sobolev_minus2_norm(s1, e) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(vals), 1)[0]
    assert 1.7 <= slope <= 2.3


def test_sobolev_aliasing_guard(s1):
    with pytest.raises(AliasingError):
        sobolev_minus2_norm(s1, 0.1, box_half_width=9.0, n_fft=64)
    with pytest.raises(AliasingError):
        sobolev_minus2_norm(s1, 0.35, box_half_width=9.0, n_fft=600)


def test_rho_is_one_on_support(s1):
    r = np.linspace(0, 1.0, 50)
    pts = np.column_stack([r, np.zeros_like(r)])
    assert np.all(evaluate_rho(s1, pts) == 1.0)
    assert evaluate_rho(s1, (1.1, 0.0)) == 0.0


@pytest.mark.parametrize(
    "build,msg",
    [
        (lambda p: PotentialSpec(1.0, ()), "no modes"),
        (lambda p: PotentialSpec(1.0, (Mode((1, 0), 1.0, p),)), "no partner"),
        (lambda p: PotentialSpec(1.0, (Mode((1, 0), 1.0, p), Mode((-1, 0), 2.0, p))), "conj"),
        (lambda p: PotentialSpec(1.0, (Mode((0, 0), 1.0, p),)), "nonzero"),
        (lambda p: PotentialSpec.from_modes(0.5, [((1, 0), 1.0, p)]), "beyond"),
        (lambda p: PotentialSpec.from_modes(1.0, [((1, 0), 1.0, p), ((1, 0), 2.0, p)]), "duplicate"),
        (lambda p: PotentialSpec.from_modes(1.0, [((1, 0), 1.0, p)], cutoff=BumpProfile(1.2, 0.5)), "plateau"),
        (lambda p: PotentialSpec.from_modes(1.0, [((1, 0), 1.0, BumpProfile(0.9))], cutoff=BumpProfile(1.0, 0.95)), "exceed"),
    ],
)
def test_spec_validation(build, msg):
    with pytest.raises(PotentialError, match=msg):
        build(BumpProfile(1.0))


def test_bad_profile():
    with pytest.raises(PotentialError):
        BumpProfile(1.0, 1.0)
    with pytest.raises(PotentialError):
        BumpProfile(1.0, kind="gaussian")


@pytest.mark.parametrize("eps", [0.0, -0.1, 1.5])
def test_eps_domain(s1, eps):
    with pytest.raises(PotentialError):
        evaluate_V(s1, eps, (0.0, 0.0))


@settings(max_examples=30, deadline=None)
@given(c=amplitudes, k1=st.integers(-3, 3), k2=st.integers(1, 3), r1=st.floats(0.0, 0.8))
def test_json_roundtrip(c, k1, k2, r1):
    spec = PotentialSpec.from_modes(1.0, [((k1, k2), c, BumpProfile(1.0, r1))])
    again = PotentialSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert {m.k: (m.c, m.profile) for m in again.modes} == {m.k: (m.c, m.profile) for m in spec.modes}
    assert again.cutoff == spec.cutoff


def test_from_dict_fills_partner_and_reports_position():
    doc = {"L": 1.0, "modes": [{"k": [1, 0], "re": 1.0, "profile": {"support_radius": 1.0}}]}
    spec = PotentialSpec.from_dict(doc)
    assert {m.k for m in spec.modes} == {(1, 0), (-1, 0)}
    with pytest.raises(PotentialError, match=r"modes\[0\]"):
        PotentialSpec.from_dict({"L": 1.0, "modes": [{"k": [1, 0], "re": 1.0}]})
    with pytest.raises(PotentialError, match="no modes"):
        PotentialSpec.from_dict({"L": 1.0, "modes": []})
