import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscibound.fredholm import (
    DET2_MAX_DIM,
    DeterminantValue,
    SolveError,
    TraceFunctional,
    born_phi,
    cross_term_integral,
    det2,
    det_identity_residual,
    eigencondition,
    phi_V,
)
from oscibound.nystrom import (
    assemble_K_V,
    assemble_L_V,
    build_grid,
    node_values,
)
from oscibound.oracle import dense_phi_oracle
from oscibound.potential import (
    AliasingError,
    BumpProfile,
    PotentialError,
    PotentialSpec,
    profile_l2_squared,
    sup_bound_M,
)
from oscibound.rootfind import predicted_lambda

EPS4 = (0.5, 0.35, 0.25, 0.18)
REGIME = "small-eps regime not reached at these eps for this potential (see decisions ledger)"


def slope(x, y):
    return np.polyfit(np.log(x), np.log(np.abs(y)), 1)[0]


# ---- det2

def test_det2_zero_operator():
    assert det2(np.zeros((4, 4))).value == 1.0


@given(t=st.floats(-0.9, 3.0), seed=st.integers(0, 1000))
def test_det2_rank_one(t, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(6)
    w = rng.standard_normal(6)
    w *= t / np.dot(u, w) if abs(np.dot(u, w)) > 1e-3 else 0.0
    tr = float(np.dot(u, w))
    assert det2(np.outer(u, w)).value == pytest.approx((1 + tr) * math.exp(-tr), rel=1e-10, abs=1e-12)


def test_det2_diagonal():
    expected = 0.5 * math.exp(0.5) * 1.25 * math.exp(-0.25)
    assert det2(np.diag([-0.5, 0.25])).value == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.8025159, abs=1e-7)


def test_det2_regularization_label():
    assert DeterminantValue(1.0).regularization == "Psi(z) = (1+z)exp(-z) - 1"


def test_det2_weights_do_not_change_value(s1):
    g = build_grid(s1, 0.35, 16)
    op = assemble_L_V(s1, 0.35, 0.9, g)
    assert det2(op).value == pytest.approx(det2(op.matrix).value, rel=1e-11)


def test_det2_eigenvalue_at_minus_one():
    assert det2(np.diag([-1.0, 0.3])).value == 0.0


def test_det2_cap():
    with pytest.raises(ValueError, match="coarser grid"):
        det2(np.zeros((DET2_MAX_DIM + 1, 1)))


# ---- phi_V and the Born expansion

def test_phi_zero_potential(silent_spec):
    g = build_grid(silent_spec, 0.35, 24)
    assert phi_V(silent_spec, 0.35, 1.5, g).phi == 0.0


def test_phi_matches_dense_inverse(s1):
    g = build_grid(s1, 0.35, 24)
    tv = phi_V(s1, 0.35, 1.5, g)
    assert tv.phi == pytest.approx(dense_phi_oracle(s1, 0.35, 1.5, g), rel=1e-10)
    assert isinstance(tv.phi, float) and tv.lam == 1.5 and 1.0 <= tv.condition_estimate < 1e3


def test_phi_reduced_solve_equals_full_system(s1):
    # the solve only touches nodes with V != 0; check against the full N x N system
    eps, lam = 0.35, 0.8
    g = build_grid(s1, eps, 20)
    L = assemble_L_V(s1, eps, lam, g).matrix
    rho, v = node_values(s1, eps, g)
    f = np.linalg.solve(np.eye(g.size) + L, rho)
    vw = v * g.weights
    full = (-np.dot(rho, vw) + np.dot(L @ f, vw)) / (2 * math.pi)
    assert phi_V(s1, eps, lam, g).phi == pytest.approx(full, rel=1e-12)


def test_phi_at_zero_lambda(s1):
    g = build_grid(s1, 0.35, 24)
    a = phi_V(s1, 0.35, 0.0, g).phi
    b = phi_V(s1, 0.35, 1e-9, g).phi
    assert a == pytest.approx(b, rel=1e-8)


def test_born_zero_is_lambda_independent(s1):
    g = build_grid(s1, 0.35, 24)
    vals = [born_phi(s1, 0.35, lam, g, 0) for lam in (0.0, 0.5, 2.0)]
    assert vals[0] == vals[1] == vals[2]
    rho, v = node_values(s1, 0.35, g)
    assert vals[0] == pytest.approx(-np.sum(rho * v * g.weights) / (2 * math.pi), rel=1e-14)


@pytest.mark.parametrize("eps,lam", [(0.5, 1.0), (0.35, 1.5), (0.25, 0.1), (0.18, 3.0)])
def test_born_order_two_is_exact(s1, eps, lam):
    g = build_grid(s1, eps, 24)
    p = phi_V(s1, eps, lam, g).phi
    assert born_phi(s1, eps, lam, g, 2) == pytest.approx(p, rel=1e-12, abs=1e-15)


def test_born_order_one_term(s1):
    g = build_grid(s1, 0.35, 24)
    tf = TraceFunctional(s1, 0.35, g)
    rho = tf.rho
    Lrho = tf.block(1.2) @ rho
    expected = tf.born(1.2, 0) + np.dot(Lrho, tf.vw) / (2 * math.pi)
    assert tf.born(1.2, 1) == pytest.approx(expected, rel=1e-13)
    with pytest.raises(ValueError):
        tf.born(1.2, 3)


def _born_remainders(spec, eps_set, n=48, lam=1.5):
    out = []
    for eps in eps_set:
        tf = TraceFunctional(spec, eps, build_grid(spec, eps, n))
        out.append(abs(tf(lam).phi - tf.born(lam, 1)))
    return out


@pytest.mark.xfail(strict=True, reason=REGIME)
def test_born_remainder_is_fourth_order(s1):
    eps = (0.5, 0.35, 0.25)
    assert slope(eps, _born_remainders(s1, eps)) >= 3.5


def test_born_remainder_shrinks(s1):
    eps = (0.5, 0.35, 0.25)
    r = _born_remainders(s1, eps)
    assert r[0] > r[1] > r[2]


# ---- invariants of phi

@pytest.mark.xfail(strict=True, reason=REGIME)
def test_phi_smallness_slope(s1):
    m = []
    for eps in EPS4:
        tf = TraceFunctional(s1, eps, build_grid(s1, eps, 32))
        m.append(max(abs(tf(lam).phi) for lam in np.geomspace(0.05, 4.0, 12)))
    assert 1.7 <= slope(EPS4, m) <= 2.3


def _continuity_constant(spec, eps, n):
    tf = TraceFunctional(spec, eps, build_grid(spec, eps, n))
    lams = np.geomspace(1e-3, sup_bound_M(spec), 12)
    ph = np.array([tf(x).phi for x in lams])
    f = lams * np.log(lams)
    return max(abs(ph[i] - ph[j]) / abs(f[i] - f[j]) for i in range(12) for j in range(i))


def test_phi_modulus_of_continuity(s1):
    c32, c64 = _continuity_constant(s1, 0.35, 32), _continuity_constant(s1, 0.35, 64)
    assert 0.5 <= c64 / c32 <= 2.0


def test_phi_cutoff_independence(s1):
    eps, lam = 0.35, 1.3
    grid = build_grid(s1, eps, 64)
    alt = PotentialSpec(s1.L, s1.modes, cutoff=BumpProfile(1.3 * s1.L, 1.0, "polynomial-smoothstep"))
    a = phi_V(s1, eps, lam, grid).phi
    b = phi_V(alt, eps, lam, grid).phi
    assert abs(a - b) <= 1e-6 * abs(a)


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning", "ignore::RuntimeWarning")
def test_singular_system_raises(s1):
    tf = TraceFunctional(s1, 0.35, build_grid(s1, 0.35, 16))
    with pytest.raises(SolveError, match="residual"):
        tf._solve(np.ones((3, 3)), np.array([1.0, 0.0, 0.0]), 0.5)


# ---- determinant identity and eigencondition

def test_det_identity_zero_potential(silent_spec):
    g = build_grid(silent_spec, 0.35, 16)
    assert det_identity_residual(silent_spec, 0.35, 0.7, g) == 0.0


def test_det_identity_s1(s1):
    assert det_identity_residual(s1, 0.35, 1.5, build_grid(s1, 0.35, 32)) <= 1e-8


def test_det_identity_at_lambda_one(s1):
    g = build_grid(s1, 0.35, 16)
    D = det2(assemble_K_V(s1, 0.35, 1.0, g)).value
    d = det2(assemble_L_V(s1, 0.35, 1.0, g)).value
    assert D == d
    assert det_identity_residual(s1, 0.35, 1.0, g) == 0.0


@settings(max_examples=8, deadline=None)
@given(lam=st.floats(0.01, 4.0), eps=st.floats(0.18, 0.5))
def test_det_identity_property(s1_sine, lam, eps):
    assert det_identity_residual(s1_sine, eps, lam, build_grid(s1_sine, eps, 16)) <= 1e-8


def test_eigencondition_trivial_cases(silent_spec, s1):
    assert eigencondition(silent_spec, 0.35, 0.4, build_grid(silent_spec, 0.35, 16)) == 1.0
    assert eigencondition(s1, 0.35, 1.0, build_grid(s1, 0.35, 16)) == 1.0
    with pytest.raises(ValueError):
        eigencondition(s1, 0.35, 0.0, build_grid(s1, 0.35, 16))


@pytest.mark.xfail(strict=True, reason=REGIME)
def test_eigencondition_near_prediction_s1(s1):
    g = build_grid(s1, 0.25, 48)
    assert abs(eigencondition(s1, 0.25, predicted_lambda(s1, 0.25), g)) <= 0.5


def test_eigencondition_near_prediction_sine(s1_sine):
    g = build_grid(s1_sine, 0.25, 48)
    assert abs(eigencondition(s1_sine, 0.25, predicted_lambda(s1_sine, 0.25), g)) <= 0.5


# ---- cross terms

@pytest.fixture(scope="module")
def broad_pair():
    p = BumpProfile(2.0)
    return PotentialSpec.from_modes(2.0, [((1, 0), 1.0, p), ((1, 1), 0.5, p)])


def test_cross_term_resonant_limit(broad_pair):
    p = broad_pair.modes[0].profile
    val = cross_term_integral(broad_pair, 0.18, 1.5, (1, 0), (-1, 0))
    assert abs(val.imag) < 1e-12 * abs(val.real)
    assert val.real / 0.18**2 == pytest.approx(profile_l2_squared(p), rel=0.05)
    # |k|^2 = 2 and |c|^2 = 1/4 for the diagonal pair
    val = cross_term_integral(broad_pair, 0.18, 1.5, (1, 1), (-1, -1))
    assert val.real / 0.18**2 == pytest.approx(0.25 * profile_l2_squared(p) / 2, rel=0.05)


def test_cross_term_resonant_is_positive_for_real_profiles(two_pair):
    for eps in EPS4:
        assert cross_term_integral(two_pair, eps, 1.0, (1, 0), (-1, 0)).real > 0


def test_cross_term_nonresonant_decay(broad_pair):
    vals = [abs(cross_term_integral(broad_pair, e, 1.5, (1, 0), (1, 1))) for e in EPS4]
    assert slope(EPS4, vals) >= 2.2


def test_cross_term_converged_in_box_and_spacing(s1):
    eps, lam = 0.5, 1.0
    fast = cross_term_integral(s1, eps, lam, (1, 0), (-1, 0)).real
    box = s1.L + 14.0
    finer = cross_term_integral(s1, eps, lam, (1, 0), (-1, 0), box_half_width=2 * box, n_fft=2048).real
    assert fast == pytest.approx(finer, rel=1e-4)


def test_cross_term_preconditions(s1):
    with pytest.raises(ValueError):
        cross_term_integral(s1, 0.35, 0.5, (1, 0), (-1, 0))
    with pytest.raises(PotentialError, match="not present"):
        cross_term_integral(s1, 0.35, 1.5, (1, 0), (0, 1))
    with pytest.raises(AliasingError):
        cross_term_integral(s1, 0.35, 1.5, (1, 0), (-1, 0), n_fft=64)
    with pytest.raises(ValueError, match="xi spacing"):
        cross_term_integral(s1, 0.35, 1.0, (1, 0), (-1, 0), box_half_width=3.0, n_fft=128)
