"""Kernel calibration, the saturation integral and its identity checks."""

import math
import random

import numpy as np
import pytest

from rockland.fields import make_standard_operator
from rockland.fundsol import (
    BumpSpec,
    ExistenceError,
    QuadratureConfig,
    SaturationEvaluator,
    calibration_residuals,
    kernel_calibrate,
    smoothstep_expr,
    tensor_gl_grid,
)
from rockland.kernels import group_gauge, heisenberg_gauge_kernel
from rockland.lifting import hom_norm_eval


def random_pairs(rng, count, lo=-2.0, hi=2.0, min_sep=0.1):
    pairs = []
    while len(pairs) < count:
        x = [rng.uniform(lo, hi), rng.uniform(lo, hi)]
        y = [rng.uniform(lo, hi), rng.uniform(lo, hi)]
        if (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2 > min_sep:
            pairs.append((x, y))
    return pairs


# -- kernel family -----------------------------------------------------------------

def test_kernel_homogeneity_invariant(grushin_gamma):
    K = grushin_gamma["kernel"]
    assert K.homogeneity_degree == -2
    assert K.check_homogeneity(200) < 1e-10


def test_kernel_decay_bound(grushin_gamma):
    """|kernel(z)| * gauge(z)^(Q - nu) stays bounded far from the origin."""
    K = grushin_gamma["kernel"]
    gauge = group_gauge(K.lifted)
    rng = random.Random(31337)
    fn = K.word_evaluator()
    bound = K.sup_on_gauge_sphere(n_samples=500)
    for _ in range(1000):
        z = [rng.gauss(0, 1) for _ in range(3)]
        rho = hom_norm_eval(gauge, z)
        if rho < 1e-6:
            continue
        scale = rng.uniform(1.0, 1e3) / rho
        zs = [v * scale ** e for v, e in zip(z, K.lifted.D_exponents)]
        rho_s = hom_norm_eval(gauge, zs)
        assert abs(float(fn(*zs))) * rho_s ** 2 <= bound


def test_kernel_annihilated_symbolically(grushin, grushin_gamma):
    assert grushin_gamma["kernel"].annihilation_residual(grushin["L"]) == 0


def test_kernel_requires_heisenberg_lift(three_var_step5):
    with pytest.raises(ValueError, match="step-2"):
        heisenberg_gauge_kernel(three_var_step5["lifted"])


def test_star_kernel_is_inverse_composition(grushin_gamma):
    K = grushin_gamma["kernel"]
    lifted = K.lifted
    rng = random.Random(7)
    star = K.word_evaluator(star=True)
    plain = K.word_evaluator()
    for _ in range(10):
        z = [rng.uniform(-2, 2) for _ in range(3)]
        zi = [float(v) for v in lifted.inverse_eval(z)]
        assert float(star(*z)) == pytest.approx(float(plain(*zi)), rel=1e-12)


# -- calibration -------------------------------------------------------------------

def test_calibration_pole_residuals(grushin_gamma):
    res = calibration_residuals(grushin_gamma["kernel"], grushin_gamma["Lt"])
    assert len(res) == 3
    assert max(res) <= 1e-3


def test_calibration_linearity(grushin_gamma):
    """Scaling the kernel by 2 doubles the identity's left side."""
    K = grushin_gamma["kernel"]
    K2 = K.with_constant(2.0 * K.calibration_constant)
    res = calibration_residuals(K2, grushin_gamma["Lt"],
                                poles=[[0.0, 0.0, 0.0]])
    # identity value moves from -1 to -2, so the residual becomes ~1
    assert res[0] == pytest.approx(1.0, abs=1e-4)


def test_calibration_rejects_wrong_shape(grushin, grushin_gamma):
    """A non-annihilating shape cannot satisfy the identity consistently."""
    import sympy as sp
    K = grushin_gamma["kernel"]
    bad = type(K)(K.lifted, K.nu, (sum(s ** 2 for s in K.syms)) ** sp.Rational(-1, 2),
                  K.syms, 1.0, "bad")
    calibrated = kernel_calibrate(bad, K.lifted, grushin_gamma["Lt"])
    res = calibration_residuals(calibrated, grushin_gamma["Lt"])
    assert max(res) > 1e-3  # identity fails away from the reference pole


# -- existence gates ---------------------------------------------------------------

def test_existence_gate_nu_ge_q(grushin, grushin_quartic, grushin_gamma):
    # nu = 4 >= q = 3: no homogeneous global fundamental solution
    with pytest.raises(ExistenceError, match="nu < q"):
        SaturationEvaluator(grushin["lifted"], grushin_quartic,
                            grushin_gamma["kernel"])


def test_kernel_degree_mismatch_rejected(grushin, grushin_gamma):
    K = grushin_gamma["kernel"]
    bad = type(K)(K.lifted, 1, K.shape, K.syms, 1.0)
    with pytest.raises(ValueError, match="nu - Q"):
        SaturationEvaluator(grushin["lifted"], grushin["L"], bad)


def test_pole_rejected(grushin_gamma):
    with pytest.raises(ValueError, match="pole"):
        grushin_gamma["ev"].gamma_eval([1.0, 2.0], [1.0, 2.0])


def test_config_validation():
    with pytest.raises(ValueError, match="positive"):
        QuadratureConfig(rel_tol=0.0)


# -- gamma values ------------------------------------------------------------------

def test_gamma_joint_homogeneity(grushin_gamma):
    rng = random.Random(99)
    pairs = random_pairs(rng, 10)
    dev = grushin_gamma["ev"].verify_homogeneity(pairs, [0.5, 2.0, 4.0])
    assert dev <= 1e-6


def test_gamma_homogeneity_lambda_one(grushin_gamma):
    dev = grushin_gamma["ev"].verify_homogeneity([([1.0, 0.5], [0.0, 0.0])],
                                                 [1.0])
    assert dev == 0.0


def test_gamma_symmetry(grushin_gamma):
    rng = random.Random(123)
    pairs = random_pairs(rng, 10)
    assert grushin_gamma["ev"].verify_symmetry(pairs) <= 1e-5


def test_gamma_star_route_symmetry(grushin_gamma):
    rng = random.Random(321)
    pairs = random_pairs(rng, 5)
    assert grushin_gamma["ev"].verify_symmetry(pairs, star=True) <= 1e-5


def test_tail_doubling_stability(grushin_gamma):
    rng = random.Random(55)
    pairs = random_pairs(rng, 20)
    checks = grushin_gamma["ev"].tail_doubling_check(pairs)
    assert all(ok for _, _, ok in checks)


def test_gamma_error_bound_reported(grushin_gamma):
    rec = grushin_gamma["ev"].gamma_record([1.0, 0.0], [0.0, 0.5])
    assert rec.error_bound > 0
    assert rec.tail_bound <= rec.error_bound
    assert rec.error_bound < 1e-6 * abs(rec.value)


# -- derivatives -------------------------------------------------------------------

def test_derivative_zero_word_equals_gamma(grushin_gamma):
    ev = grushin_gamma["ev"]
    x, y = [1.0, 0.3], [0.2, -0.5]
    assert ev.gamma_x_derivative((), x, y) == ev.gamma_eval(x, y)


def test_derivative_matches_finite_differences(grushin_gamma):
    ev = grushin_gamma["ev"]
    rng = random.Random(77)
    for x, y in random_pairs(rng, 10, lo=-1.5, hi=1.5, min_sep=0.3):
        for word in [(0,), (1,)]:
            exact = ev.gamma_x_derivative(word, x, y)
            fd = ev.gamma_x_derivative_fd(word, x, y, step=1e-4)
            assert fd.method == "fd"
            assert abs(exact - fd.value) <= 1e-4 * max(abs(exact), 1e-6)


def test_derivative_scaling_exponent(grushin_gamma):
    """First derivatives scale with exponent nu - q - 1 = -2."""
    ev = grushin_gamma["ev"]
    rng = random.Random(88)
    for x, y in random_pairs(rng, 5):
        base = ev.gamma_x_derivative((0,), x, y)
        for lam in (0.5, 2.0):
            xs = [lam * x[0], lam ** 2 * x[1]]
            ys = [lam * y[0], lam ** 2 * y[1]]
            scaled = ev.gamma_x_derivative((0,), xs, ys)
            assert abs(scaled - lam ** -2 * base) <= 1e-5 * abs(base)


def test_y_derivative_matches_finite_differences(grushin_gamma):
    from rockland.lifting import exp_flow
    ev = grushin_gamma["ev"]
    x, y = [1.0, 0.3], [0.2, -0.5]
    h = 1e-4
    for i in range(2):
        X = ev.lifted.base_fields[i]
        fd = (ev.gamma_eval(x, exp_flow(X, y, h))
              - ev.gamma_eval(x, exp_flow(X, y, -h))) / (2 * h)
        exact = ev.gamma_y_derivative((i,), x, y)
        assert abs(exact - fd) <= 1e-4 * max(abs(exact), 1e-6)


# -- integrability witness -----------------------------------------------------------

def test_xi_profile_integrable(grushin_gamma):
    """The fiber profile obeys its closed-form dyadic tail bound."""
    from scipy import integrate
    ev = grushin_gamma["ev"]
    profile, t_const, s_e = ev.xi_profile([1.0, 0.0], [0.0, 0.5])
    assert s_e == -1
    for R in (8.0, 64.0, 512.0):
        shell, _ = integrate.quad(lambda z: abs(profile(z)), R, 2 * R)
        shell += integrate.quad(lambda z: abs(profile(z)), -2 * R, -R)[0]
        assert shell <= t_const * R ** s_e


# -- left inverse ------------------------------------------------------------------

def test_left_inverse_identity(grushin_gamma):
    ev = grushin_gamma["ev"]
    y = [1.0, 0.0]
    residual = ev.verify_left_inverse(BumpSpec((1.0, 0.0)), y)
    assert residual <= 5e-3


def test_left_inverse_far_bump(grushin_gamma):
    """A bump whose support misses y integrates to ~0 = phi(y)."""
    ev = grushin_gamma["ev"]
    residual = ev.verify_left_inverse(BumpSpec((30.0, 30.0)), [1.0, 0.0])
    assert residual <= 1e-4


def test_left_inverse_rescaled_bump(grushin_gamma):
    """Residual stays the same order under shrinking the bump and pole."""
    ev = grushin_gamma["ev"]
    residual = ev.verify_left_inverse(
        BumpSpec((0.5, 0.0), flat_radius=0.5, support_radius=1.0), [0.5, 0.0])
    assert residual <= 5e-3


# -- plumbing ----------------------------------------------------------------------

def test_smoothstep_endpoints():
    import sympy as sp
    t = sp.Symbol("t")
    s = smoothstep_expr(t, 5)
    assert s.subs(t, 0) == 0 and s.subs(t, 1) == 1
    # C^5: first five derivatives vanish at both ends
    d = s
    for _ in range(5):
        d = sp.diff(d, t)
        assert d.subs(t, 0) == 0 and d.subs(t, 1) == 0


def test_bump_values():
    b = BumpSpec((0.0, 0.0))
    assert b([0.5, 0.0]) == 1.0
    assert b([3.0, 0.0]) == 0.0
    assert 0.0 < b([1.5, 0.0]) < 1.0
    with pytest.raises(ValueError):
        BumpSpec((0.0,), flat_radius=2.0, support_radius=1.0)


def test_tensor_gl_grid_exactness():
    """The composite rule integrates a smooth polynomial exactly."""
    pts, wts = tensor_gl_grid([(-1.0, 2.0), (0.0, 1.0)], panels=3, nodes=5)
    vals = pts[:, 0] ** 4 * pts[:, 1] ** 2
    exact = ((2.0 ** 5 - (-1.0) ** 5) / 5.0) * (1.0 / 3.0)
    assert float(np.sum(vals * wts)) == pytest.approx(exact, rel=1e-13)
