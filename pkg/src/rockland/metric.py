"""Weighted control distance, metric ball volumes and estimate harnesses.

Paths are piecewise-constant controls; each segment endpoint is a polynomial
in the start point and the controls (the Lie series terminates), so the inner
feasibility minimization has exact gradients.  All randomness is seeded and
the seed travels with every result record.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy import optimize

from .fields import DilationFamily, PolyVectorField, certify_homogeneity
from .kernels import poly_to_sympy
from .lifting import FLOW_ITERATION_CAP, exp_flow, flow_map
from .poly import Poly, embed, poly_diff


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant controls: (duration, controls) per segment."""

    segments: Tuple[Tuple[float, Tuple[float, ...]], ...]
    delta: float

    def __post_init__(self) -> None:
        total = sum(d for d, _ in self.segments)
        if self.segments and abs(total - 1.0) > 1e-9:
            raise ValueError("segment durations must sum to 1")

    def check_bounds(self, degrees: Sequence[int], slack: float = 1e-9) -> bool:
        return all(abs(a) <= self.delta ** nu + slack
                   for _, ctr in self.segments
                   for a, nu in zip(ctr, degrees))


@dataclass(frozen=True)
class DistanceResult:
    upper: float
    lower: float   # largest scale the multi-start search certified infeasible
    path: Optional[ControlPath]
    seed: int

    @property
    def value(self) -> float:
        return self.upper


@dataclass(frozen=True)
class VolumeResult:
    estimate: float
    confidence_interval: Tuple[float, float]
    samples: int
    seed: int
    box_volume: float
    hits: int


@dataclass(frozen=True)
class DistanceConfig:
    segment_schedule: Tuple[int, ...] = (4, 8, 16)
    starts: int = 4
    tol: float = 1e-3
    reach_tol: float = 1e-9
    max_doublings: int = 60
    maxiter: int = 200


def endpoint(x: Sequence, path: ControlPath,
             fields: Sequence[PolyVectorField]) -> list:
    """Exact endpoint: per segment, flow of sum_i a_i X_i for the duration.

    Every float is a dyadic rational, so the flow itself is exact; the result
    comes back as floats unless all inputs were exact rationals or integers.
    """
    exact = all(not isinstance(v, float) for v in x) and \
        all(not isinstance(v, float)
            for d, ctr in path.segments for v in (d, *ctr))
    cur = list(x)
    for duration, controls in path.segments:
        V = PolyVectorField.zero(fields[0].nvars)
        for a, X in zip(controls, fields):
            V = V.add(X.scale(Fraction(a)))
        cur = exp_flow(V, cur, Fraction(duration))
    return cur if exact else [float(v) for v in cur]


def _poly_abs_bound(p: Poly, bounds: Sequence[float]) -> float:
    """sup |p| over the box |x_i| <= bounds[i], by the triangle inequality."""
    total = 0.0
    for mono, c in p.terms.items():
        term = abs(float(c))
        for b, e in zip(bounds, mono):
            if e:
                term *= b ** e
        total += term
    return total


class MetricSpace:
    """Control metric of a certified homogeneous system."""

    def __init__(self, fields: Sequence[PolyVectorField],
                 delta: DilationFamily,
                 config: Optional[DistanceConfig] = None) -> None:
        self.fields = tuple(fields)
        self.delta = delta
        self.config = config or DistanceConfig()
        self.n = fields[0].nvars
        self.m = len(fields)
        self.degrees = tuple(
            certify_homogeneity(X, delta, triangular=False)
            or X.declared_degree for X in fields)
        if any(d is None for d in self.degrees):
            raise ValueError("every field must certify a homogeneity degree")
        self._compile_flow()

    # -- compiled time-1 flow in (x, controls) --------------------------------

    def _compile_flow(self) -> None:
        n, m = self.n, self.m
        nv = n + m
        V = PolyVectorField.zero(nv)
        for j, X in enumerate(self.fields):
            a_j = Poly.var(nv, n + j)
            coeffs = tuple(embed(c, nv) * a_j for c in X.coeffs) \
                + (Poly.zero(nv),) * m
            V = V.add(PolyVectorField(nv, coeffs))
        maps = flow_map(V, range(n), FLOW_ITERATION_CAP)
        syms = sp.symbols(f"s1:{nv + 1}", real=True)
        exprs = [poly_to_sympy(p, syms) for p in maps]
        jx = [[poly_to_sympy(poly_diff(p, k), syms) for k in range(n)]
              for p in maps]
        ja = [[poly_to_sympy(poly_diff(p, n + j), syms) for j in range(m)]
              for p in maps]
        self._flow = sp.lambdify(syms, sp.Matrix(exprs), modules="numpy")
        self._flow_jx = sp.lambdify(syms, sp.Matrix(jx), modules="numpy")
        self._flow_ja = sp.lambdify(syms, sp.Matrix(ja), modules="numpy")

    def _objective(self, x: np.ndarray, y: np.ndarray,
                   controls: np.ndarray, S: int):
        n, m = self.n, self.m
        b = controls.reshape(S, m)
        pts = [x]
        for s in range(S):
            pts.append(np.asarray(
                self._flow(*pts[-1], *b[s]), dtype=float).ravel())
        diff = pts[-1] - y
        obj = float(diff @ diff)
        grad_p = 2.0 * diff
        grad = np.zeros((S, m))
        for s in reversed(range(S)):
            args = (*pts[s], *b[s])
            grad[s] = grad_p @ np.asarray(self._flow_ja(*args), dtype=float)
            grad_p = grad_p @ np.asarray(self._flow_jx(*args), dtype=float)
        return obj, grad.ravel()

    # -- feasibility and distance ----------------------------------------------

    def feasible(self, x: Sequence[float], y: Sequence[float], scale: float,
                 segments: int, rng: random.Random,
                 reach: float, starts: Optional[int] = None
                 ) -> Tuple[bool, Optional[np.ndarray], float]:
        """Search for a path of the given scale connecting x to y."""
        cfg = self.config
        S, m = segments, self.m
        xv, yv = np.asarray(x, float), np.asarray(y, float)
        hi = np.array([[scale ** nu / S for nu in self.degrees]] * S).ravel()
        bounds = list(zip(-hi, hi))
        best, best_obj = None, math.inf
        for trial in range(starts or cfg.starts):
            if trial == 0:
                c0 = np.zeros(S * m)
            else:
                c0 = np.array([rng.uniform(-h, h) for h in hi])
            res = optimize.minimize(
                lambda c: self._objective(xv, yv, c, S), c0, jac=True,
                method="L-BFGS-B", bounds=bounds,
                options={"maxiter": cfg.maxiter, "ftol": 1e-18, "gtol": 1e-14})
            if res.fun < best_obj:
                best, best_obj = res.x, res.fun
            if math.sqrt(max(res.fun, 0.0)) <= reach:
                return True, res.x, res.fun
        return False, best, best_obj

    def _reach_tol(self, x: Sequence[float], y: Sequence[float]) -> float:
        span = max(abs(float(a) - float(b)) for a, b in zip(x, y))
        return self.config.reach_tol * (1.0 + span)

    def distance(self, x: Sequence[float], y: Sequence[float],
                 tol: Optional[float] = None, seed: int = 2024
                 ) -> DistanceResult:
        """Bisection on the scale; feasibility by multi-start minimization."""
        cfg = self.config
        tol = tol if tol is not None else cfg.tol
        if all(float(a) == float(b) for a, b in zip(x, y)):
            return DistanceResult(0.0, 0.0, ControlPath((), 0.0), seed)
        rng = random.Random(seed)
        reach = self._reach_tol(x, y)
        sigma = self.delta.sigma
        guess = sum(abs(float(a) - float(b)) ** (1.0 / s)
                    for a, b, s in zip(x, y, sigma)) or 1e-6

        def feas(scale: float) -> Tuple[bool, Optional[np.ndarray], int]:
            for S in cfg.segment_schedule:
                ok, ctr, _ = self.feasible(x, y, scale, S, rng, reach)
                if ok:
                    return True, ctr, S
            return False, None, cfg.segment_schedule[0]

        lo, hi, path = 0.0, None, None
        scale = guess
        for _ in range(cfg.max_doublings):
            ok, ctr, S = feas(scale)
            if ok:
                hi, path = scale, (ctr, S)
                break
            lo, scale = scale, 2.0 * scale
        if hi is None:
            raise RuntimeError("feasibility search stagnated; no path found "
                               f"up to scale {scale / 2.0}")
        while hi - lo > tol * hi:
            mid = 0.5 * (hi + lo)
            ok, ctr, S = feas(mid)
            if ok:
                hi, path = mid, (ctr, S)
            else:
                lo = mid
        ctr, S = path
        segs = tuple((1.0 / S, tuple(float(v) * S for v in ctr[s * self.m:(s + 1) * self.m]))
                     for s in range(S))
        return DistanceResult(hi, lo, ControlPath(segs, hi), seed)

    # -- certified anisotropic bounding box -------------------------------------

    def box_bounds(self, x: Sequence[float], r: float) -> List[float]:
        """Coordinate excursion bounds for any path of scale <= r from x.

        Processed in increasing dilation-weight order: the i-th velocity is
        sum_j a_j * (coeff of X_j), the coefficient depends only on already
        bounded lower-weight coordinates, and |a_j| <= r^{nu_j}.
        """
        n = self.n
        sigma = self.delta.sigma
        B = [0.0] * n
        for i in sorted(range(n), key=lambda k: sigma[k]):
            total = 0.0
            for j, X in enumerate(self.fields):
                c = X.coeffs[i]
                if c.is_zero():
                    continue
                env = [abs(float(x[k])) + B[k] for k in range(n)]
                total += r ** self.degrees[j] * _poly_abs_bound(c, env)
            B[i] = total * 1.000001  # float-rounding headroom
        return B

    # -- Monte Carlo ball volume -------------------------------------------------

    def ball_volume(self, x: Sequence[float], r: float,
                    n_samples: int = 400, seed: int = 7071,
                    membership_relax: float = 3.0) -> VolumeResult:
        """MC volume of the ball of radius r; membership biased to over-count.

        Membership is one feasibility solve at scale r with the reach
        tolerance relaxed by membership_relax times the distance tolerance.
        """
        if r <= 0:
            raise ValueError("radius must be positive")
        cfg = self.config
        rng = random.Random(seed)
        B = self.box_bounds(x, r)
        box_volume = math.prod(2.0 * b for b in B)
        reach = membership_relax * cfg.tol * r
        S = cfg.segment_schedule[0]
        hits = 0
        for _ in range(n_samples):
            u = [float(xi) + rng.uniform(-b, b) for xi, b in zip(x, B)]
            ok, _, _ = self.feasible(x, u, r, S, rng, reach)
            if ok:
                hits += 1
        p = hits / n_samples
        est = box_volume * p
        half = 1.96 * math.sqrt(max(p * (1.0 - p), 1.0 / n_samples) / n_samples)
        ci = (box_volume * max(p - half, 0.0), box_volume * (p + half))
        return VolumeResult(est, ci, n_samples, seed, box_volume, hits)

    def doubling_check(self, x: Sequence[float], radii: Sequence[float],
                       n_samples: int = 400, seed: int = 7071) -> List[dict]:
        """|B(x, 2r)| / |B(x, r)| with interval propagation, per radius."""
        out = []
        for k, r in enumerate(radii):
            v1 = self.ball_volume(x, r, n_samples, seed + 2 * k)
            v2 = self.ball_volume(x, 2.0 * r, n_samples, seed + 2 * k + 1)
            ratio = v2.estimate / v1.estimate
            lo = v2.confidence_interval[0] / max(v1.confidence_interval[1], 1e-300)
            hi = v2.confidence_interval[1] / max(v1.confidence_interval[0], 1e-300)
            out.append({"radius": r, "ratio": ratio, "ratio_lo": lo,
                        "ratio_hi": hi, "seed": seed})
        return out

    def fractional_integral_check(self, x: Sequence[float], r: float,
                                  alpha: float, n_samples: int = 150,
                                  seed: int = 31415,
                                  vol_fn: Optional[Callable] = None,
                                  tol: float = 3e-3) -> float:
        """MC estimate of the alpha-fractional integral over the r-ball, / r^alpha.

        integral over {d(x,y) < r} of d(x,y)^alpha / |B(x, d(x,y))| dy,
        reported as a multiple of r^alpha.
        """
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if vol_fn is None:
            radii = [r * 2.0 ** k for k in range(-6, 1)]
            curve = [self.ball_volume(x, s, 200, seed + 13 + i)
                     for i, s in enumerate(radii)]
            vol_fn = volume_interpolator(radii, [v.estimate for v in curve])
        rng = random.Random(seed)
        B = self.box_bounds(x, r)
        box_volume = math.prod(2.0 * b for b in B)
        total = 0.0
        for _ in range(n_samples):
            u = [float(xi) + rng.uniform(-b, b) for xi, b in zip(x, B)]
            try:
                d = self.distance(x, u, tol=tol, seed=seed).upper
            except RuntimeError:
                continue
            if 0.0 < d < r:
                total += d ** alpha / vol_fn(d)
        return (box_volume * total / n_samples) / r ** alpha


def volume_interpolator(radii: Sequence[float],
                        volumes: Sequence[float]) -> Callable[[float], float]:
    """Log-log piecewise-linear |B(r)|, extrapolated with the edge slopes."""
    lr = np.log(np.asarray(radii, float))
    lv = np.log(np.asarray(volumes, float))

    def fn(r: float) -> float:
        t = math.log(r)
        if t <= lr[0]:
            slope = (lv[1] - lv[0]) / (lr[1] - lr[0])
            return math.exp(lv[0] + slope * (t - lr[0]))
        if t >= lr[-1]:
            slope = (lv[-1] - lv[-2]) / (lr[-1] - lr[-2])
            return math.exp(lv[-1] + slope * (t - lr[-1]))
        return math.exp(float(np.interp(t, lr, lv)))

    return fn


def volume_slope(radii: Sequence[float], volumes: Sequence[float]) -> float:
    """Least-squares slope of log |B| against log r."""
    lr = np.log(np.asarray(radii, float))
    lv = np.log(np.asarray(volumes, float))
    A = np.stack([lr, np.ones_like(lr)], axis=1)
    sol, *_ = np.linalg.lstsq(A, lv, rcond=None)
    return float(sol[0])


# -- pointwise estimate harness ----------------------------------------------------

@dataclass(frozen=True)
class EstimateRow:
    x: Tuple[float, ...]
    y: Tuple[float, ...]
    word: Tuple[int, ...]
    dist: float
    volume: float
    derivative: float
    ratio: float


@dataclass(frozen=True)
class EstimateScanReport:
    order: int
    critical: bool
    rows: Tuple[EstimateRow, ...]
    sup_ratio: float
    r0: Optional[float]   # fitted log-correction scale in the critical case


def derivative_words(degrees: Sequence[int], weight: int) -> List[Tuple[int, ...]]:
    """All words over the fields with the given total homogeneity weight."""
    out: List[Tuple[int, ...]] = []

    def rec(prefix: Tuple[int, ...], rem: int) -> None:
        if rem == 0:
            out.append(prefix)
            return
        for i, d in enumerate(degrees):
            if d <= rem:
                rec(prefix + (i,), rem - d)

    rec((), weight)
    return out


def estimate_scan(ev, space: MetricSpace, order: int,
                  pairs: Sequence[Tuple[Sequence[float], Sequence[float]]],
                  n_samples: int = 300, seed: int = 2718,
                  vol_fn: Optional[Callable] = None,
                  dist_tol: float = 1e-3) -> EstimateScanReport:
    """Ratios of |derivative of Gamma| against the metric bound, per pair.

    Non-critical (order > nu - n): ratio = |Z Gamma| * |B(x, d)| / d^{nu - order}.
    Critical (order == nu - n): the bound carries a log(R0 / d) correction with
    R0 fitted as twice the largest sampled distance.
    """
    nu, n = ev.operator.nu, space.n
    if order < nu - n:
        raise ValueError(
            f"derivative order {order} is below nu - n = {nu - n}; outside "
            "the range of the pointwise upper estimates")
    critical = order == nu - n
    words = derivative_words(space.degrees, order) if order > 0 else [()]
    dists = []
    for x, y in pairs:
        dists.append(space.distance(x, y, tol=dist_tol, seed=seed).upper)
    r0 = 2.0 * max(dists) if critical else None
    rows = []
    for (x, y), d in zip(pairs, dists):
        if vol_fn is not None:
            vol = vol_fn(x, d)
        else:
            vol = space.ball_volume(x, d, n_samples, seed).estimate
        for word in words:
            z = ev.gamma_x_derivative(word, x, y)
            denom = d ** (nu - order)
            if critical:
                denom *= math.log(r0 / d)
            ratio = abs(z) * vol / denom
            rows.append(EstimateRow(tuple(map(float, x)), tuple(map(float, y)),
                                    word, d, vol, z, ratio))
    sup_ratio = max(row.ratio for row in rows)
    return EstimateScanReport(order, critical, tuple(rows), sup_ratio, r0)


# -- module-level operation wrappers -------------------------------------------

def distance(x: Sequence[float], y: Sequence[float],
             fields: Sequence[PolyVectorField], delta: DilationFamily,
             tol: float = 1e-3, seed: int = 2024,
             config: Optional[DistanceConfig] = None) -> DistanceResult:
    return MetricSpace(fields, delta, config).distance(x, y, tol, seed)


def ball_volume(space: MetricSpace, x: Sequence[float], r: float,
                n_samples: int = 400, seed: int = 7071) -> VolumeResult:
    return space.ball_volume(x, r, n_samples, seed)
