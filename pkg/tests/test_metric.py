"""Control distance, ball volumes, doubling and the estimate harness."""

import math
import random

import pytest

from rockland.metric import (
    ControlPath,
    DistanceResult,
    MetricSpace,
    derivative_words,
    endpoint,
    estimate_scan,
    volume_interpolator,
    volume_slope,
)


# -- endpoints ----------------------------------------------------------------------

def test_endpoint_single_segment(grushin):
    path = ControlPath(((1.0, (0.75, 0.0)),), 1.0)
    assert endpoint([0, 0], path, grushin["gens"]) == [0.75, 0.0]


def test_endpoint_empty_controls(grushin):
    path = ControlPath(((1.0, (0.0, 0.0)),), 1.0)
    assert endpoint([0.5, -2.0], path, grushin["gens"]) == [0.5, -2.0]


def test_endpoint_two_segments(grushin):
    # flow d1 for half time at speed 2, then x1*d2 with x1 frozen at 1
    path = ControlPath(((0.5, (2.0, 0.0)), (0.5, (0.0, 2.0))), 1.0)
    assert endpoint([0, 0], path, grushin["gens"]) == [1.0, 1.0]


def test_control_path_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        ControlPath(((0.4, (0.0,)),), 1.0)
    p = ControlPath(((1.0, (0.5, 0.25)),), 0.5)
    assert p.check_bounds((1, 2))
    assert not ControlPath(((1.0, (0.9, 0.0)),), 0.5).check_bounds((1, 2))


# -- distance ----------------------------------------------------------------------

def test_distance_zero(grushin_metric):
    res = grushin_metric.distance([0.3, -1.0], [0.3, -1.0])
    assert res.upper == 0.0 and res.lower == 0.0


def test_distance_grushin_unit(grushin_metric):
    res = grushin_metric.distance([0.0, 0.0], [1.0, 0.0])
    assert abs(res.upper - 1.0) <= 1e-3
    assert res.lower <= res.upper


def test_distance_bracket_and_path(grushin, grushin_metric):
    res = grushin_metric.distance([0.0, 0.0], [0.7, 0.4])
    assert res.lower <= res.upper
    assert res.path.check_bounds(grushin_metric.degrees)
    reached = endpoint([0.0, 0.0], res.path, grushin["gens"])
    err = math.hypot(reached[0] - 0.7, reached[1] - 0.4)
    assert err <= 1e-6


def test_distance_symmetry(grushin_metric):
    rng = random.Random(12)
    for _ in range(3):
        x = [rng.uniform(-1, 1), rng.uniform(-1, 1)]
        y = [rng.uniform(-1, 1), rng.uniform(-1, 1)]
        a = grushin_metric.distance(x, y).upper
        b = grushin_metric.distance(y, x).upper
        assert abs(a - b) <= 2e-3 * max(a, b)


def test_distance_triangle(grushin_metric):
    rng = random.Random(21)
    for _ in range(3):
        pts = [[rng.uniform(-1, 1), rng.uniform(-1, 1)] for _ in range(3)]
        dxz = grushin_metric.distance(pts[0], pts[2]).upper
        dxy = grushin_metric.distance(pts[0], pts[1]).upper
        dyz = grushin_metric.distance(pts[1], pts[2]).upper
        assert dxz <= dxy + dyz + 3e-3 * (dxy + dyz)


def test_distance_origin_scaling(grushin_metric):
    rng = random.Random(31)
    for _ in range(3):
        y = [rng.uniform(-1, 1), rng.uniform(-1, 1)]
        base = grushin_metric.distance([0.0, 0.0], y).upper
        for lam in (0.5, 2.0):
            scaled = grushin_metric.distance(
                [0.0, 0.0], [lam * y[0], lam ** 2 * y[1]]).upper
            assert abs(scaled - lam * base) <= 0.05 * lam * base


def test_distance_seeded_reproducible(grushin_metric):
    a = grushin_metric.distance([0.1, 0.5], [-0.8, 0.2], seed=5)
    b = grushin_metric.distance([0.1, 0.5], [-0.8, 0.2], seed=5)
    assert a.upper == b.upper and a.lower == b.lower


# -- bounding box certificate -----------------------------------------------------

def test_box_bounds_certify(grushin, grushin_metric):
    """Random feasible paths never leave the certified box."""
    rng = random.Random(44)
    x0 = [0.5, -0.3]
    for r in (0.5, 2.0):
        B = grushin_metric.box_bounds(x0, r)
        for _ in range(20):
            S = 4
            segs = tuple(
                (1.0 / S, (rng.uniform(-r, r), rng.uniform(-r ** 2, r ** 2)))
                for _ in range(S))
            reached = endpoint(x0, ControlPath(segs, r), grushin["gens"])
            for v, c, b in zip(reached, x0, B):
                assert abs(float(v) - c) <= b


# -- ball volumes ------------------------------------------------------------------

def test_volume_positive_and_monotone(grushin_metric):
    v1 = grushin_metric.ball_volume([0.0, 0.0], 0.5, 200, seed=1)
    v2 = grushin_metric.ball_volume([0.0, 0.0], 1.0, 200, seed=2)
    assert v1.estimate > 0
    assert v1.confidence_interval[0] <= v2.confidence_interval[1]
    assert v1.confidence_interval[0] <= v1.estimate <= v1.confidence_interval[1]


def test_volume_slope_at_origin(grushin_metric):
    radii = [2.0 ** k for k in range(-4, 3)]
    vols = [grushin_metric.ball_volume([0.0, 0.0], r, 300, seed=40 + i).estimate
            for i, r in enumerate(radii)]
    slope = volume_slope(radii, vols)
    assert abs(slope - 3.0) <= 0.15


def test_doubling_origin(grushin_metric):
    checks = grushin_metric.doubling_check([0.0, 0.0], [1.0], 400, seed=11)
    ratio = checks[0]["ratio"]
    assert checks[0]["ratio_lo"] <= 8.0 <= checks[0]["ratio_hi"]
    assert 6.0 <= ratio <= 10.0


def test_doubling_off_origin_bounded(grushin_metric):
    radii = [0.25, 0.5, 1.0, 2.0, 4.0]
    checks = grushin_metric.doubling_check([1.0, 0.0], radii, 250, seed=9)
    for c in checks:
        assert 1.0 <= c["ratio_hi"]
        assert c["ratio"] <= 32.0


def test_fractional_integral_stable(grushin_metric):
    x = [0.0, 0.0]
    radii = [2.0 * 2.0 ** k for k in range(-7, 1)]
    curve = [grushin_metric.ball_volume(x, s, 200, seed=60 + i).estimate
             for i, s in enumerate(radii)]
    vol_fn = volume_interpolator(radii, curve)
    vals = [grushin_metric.fractional_integral_check(
        x, r, 1.0, n_samples=100, seed=7, vol_fn=vol_fn)
        for r in (0.5, 1.0, 2.0)]
    mid = sorted(vals)[1]
    assert all(abs(v - mid) <= 0.3 * mid for v in vals)


def test_volume_interpolator_roundtrip():
    radii = [0.5, 1.0, 2.0]
    vols = [1.0, 8.0, 64.0]
    fn = volume_interpolator(radii, vols)
    assert fn(1.0) == pytest.approx(8.0)
    assert fn(1.5) == pytest.approx(27.0, rel=1e-12)  # log-log linear
    assert fn(4.0) == pytest.approx(512.0, rel=1e-12)  # edge-slope extrapolation


def test_volume_slope_exact_powerlaw():
    radii = [2.0 ** k for k in range(-2, 3)]
    assert volume_slope(radii, [r ** 3 for r in radii]) == pytest.approx(3.0)


# -- estimate harness ---------------------------------------------------------------

def scaled_pair(pair, lam):
    (x, y) = pair
    return ([lam * x[0], lam ** 2 * x[1]], [lam * y[0], lam ** 2 * y[1]])


def test_derivative_words():
    assert derivative_words((1, 1), 1) == [(0,), (1,)]
    assert set(derivative_words((1, 2), 2)) == {(0, 0), (1,)}
    assert derivative_words((1, 1), 0) == [()]


def test_estimate_scan_rejects_low_order(grushin_gamma, grushin_metric):
    with pytest.raises(ValueError, match="nu - n"):
        estimate_scan(grushin_gamma["ev"], grushin_metric, -1,
                      [([1.0, 0.0], [0.0, 0.0])])


def test_estimate_scan_noncritical_stable(grushin_gamma, grushin_metric):
    """Sup ratio at order 1 varies by < 2x across two dyadic scale decades."""
    rng = random.Random(17)
    base = []
    while len(base) < 3:
        x = [rng.uniform(-1, 1), rng.uniform(-1, 1)]
        y = [rng.uniform(-1, 1), rng.uniform(-1, 1)]
        if (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2 > 0.2:
            base.append((x, y))
    sups = {}
    for lam in (0.25, 0.5, 1.0, 2.0, 4.0):
        pairs = [scaled_pair(p, lam) for p in base]
        rep = estimate_scan(grushin_gamma["ev"], grushin_metric, 1, pairs,
                            n_samples=250, seed=3)
        assert not rep.critical
        assert math.isfinite(rep.sup_ratio)
        sups[lam] = rep.sup_ratio
    assert max(sups.values()) < 2.0 * min(sups.values())


def test_estimate_scan_critical_bounded(grushin_gamma, grushin_metric):
    """Order 0 is the critical case for the Grushin operator (nu - n = 0)."""
    rng = random.Random(19)
    pairs = []
    while len(pairs) < 5:
        x = [rng.uniform(-2, 2), rng.uniform(-2, 2)]
        y = [rng.uniform(-2, 2), rng.uniform(-2, 2)]
        if (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2 > 0.2:
            pairs.append((x, y))
    rep = estimate_scan(grushin_gamma["ev"], grushin_metric, 0, pairs,
                        n_samples=250, seed=5)
    assert rep.critical and rep.r0 is not None
    assert math.isfinite(rep.sup_ratio)
    for row in rep.rows:
        assert row.dist < rep.r0
