"""Global fundamental solutions by the saturation integral over the lift.

Gamma(x, y) integrates the lifted kernel over the complementary variables,
after the unimodular slice change of variable that places the fiber gauge
directly on the integration variable.  The compact core is integrated
numerically; the improper tail is bounded in closed form by a dyadic-shell
geometric series and never integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .fields import (
    DilationFamily,
    OperatorSpec,
    certify_homogeneity,
    operator_transpose,
)
from .kernels import KernelSpec, apply_operator_sympy, poly_to_sympy
from .lifting import (
    HomNorm,
    LiftedSystem,
    compose_map,
    exp_flow,
    hom_norm_eval,
    invert_graded_map,
)
from .poly import Poly, poly_eval, substitute


class ExistenceError(ValueError):
    """Raised when no dilation-homogeneous global fundamental solution exists."""


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    core_radius_factor: float = 8.0
    min_radius_factor: float = 64.0
    sup_samples: int = 2000
    sup_safety: float = 2.0
    seed: int = 10007

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 10:
            raise ValueError("max_subdivisions too small")


@dataclass(frozen=True)
class GammaRecord:
    value: float
    error_bound: float
    tail_bound: float
    radius: float
    method: str          # "exact" sensitivities or "fd" fallback
    route: str           # "plain" kernel or "star" (transposed) kernel
    word: Tuple[int, ...]


# -- smooth flat-top bumps ------------------------------------------------------

def smoothstep_expr(t: sp.Expr, order: int) -> sp.Expr:
    """Polynomial smoothstep: 0 at t<=0, 1 at t>=1, C^order at the joins."""
    m = order
    s = sum(sp.binomial(m + k, k) * sp.binomial(2 * m + 1, m - k) * (-t) ** k
            for k in range(m + 1))
    return t ** (m + 1) * s


@dataclass(frozen=True)
class BumpSpec:
    """Flat-top bump: 1 inside the flat radius, 0 outside the support radius.

    Polynomial joins keep every derivative exactly computable and make the
    function vanish identically, not merely approximately, outside the
    support and all derivatives vanish on the flat top.
    """

    center: Tuple[float, ...]
    flat_radius: float = 1.0
    support_radius: float = 2.0
    order: int = 9

    def __post_init__(self) -> None:
        if not 0 < self.flat_radius < self.support_radius:
            raise ValueError("need 0 < flat_radius < support_radius")

    def expr(self, syms: Sequence[sp.Symbol]) -> sp.Expr:
        a2 = sp.Float(self.flat_radius ** 2)
        b2 = sp.Float(self.support_radius ** 2)
        r2 = sum((s - sp.Float(c)) ** 2 for s, c in zip(syms, self.center))
        t = (r2 - a2) / (b2 - a2)
        return sp.Piecewise((1, r2 <= a2), (0, r2 >= b2),
                            (1 - smoothstep_expr(t, self.order), True))

    def __call__(self, point: Sequence[float]) -> float:
        r2 = sum((v - c) ** 2 for v, c in zip(point, self.center))
        a2, b2 = self.flat_radius ** 2, self.support_radius ** 2
        if r2 <= a2:
            return 1.0
        if r2 >= b2:
            return 0.0
        t = sp.Float((r2 - a2) / (b2 - a2))
        return float(1 - smoothstep_expr(t, self.order))

    def box(self) -> List[Tuple[float, float]]:
        b = self.support_radius
        return [(c - b, c + b) for c in self.center]


# -- composite Gauss-Legendre tensor grids ---------------------------------------

def tensor_gl_grid(bounds: Sequence[Tuple[float, float]], panels: int,
                   nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Flattened points (M, dim) and weights (M,) of a composite GL rule."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    axes, wts = [], []
    for lo, hi in bounds:
        edges = np.linspace(lo, hi, panels + 1)
        pts_i, wts_i = [], []
        for i in range(panels):
            c, h = 0.5 * (edges[i] + edges[i + 1]), 0.5 * (edges[i + 1] - edges[i])
            pts_i.append(c + h * x)
            wts_i.append(h * w)
        axes.append(np.concatenate(pts_i))
        wts.append(np.concatenate(wts_i))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    weight = np.ones(pts.shape[0])
    dim = len(bounds)
    for d in range(dim):
        shape = [1] * dim
        shape[d] = -1
        weight = weight * np.broadcast_to(
            wts[d].reshape(shape), [len(a) for a in axes]).ravel()
    return pts, weight


def _poly_eval_arrays(p: Poly, coords: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros_like(coords[0], dtype=float)
    for mono, c in p.terms.items():
        term = np.full_like(coords[0], float(c), dtype=float)
        for v, e in zip(coords, mono):
            if e:
                term = term * v ** e
        out = out + term
    return out


# -- kernel calibration ----------------------------------------------------------

def _lifted_bump_data(kernel: KernelSpec, lifted: LiftedSystem,
                      op_lifted: OperatorSpec, bump: BumpSpec,
                      panels: int, nodes: int):
    """Grid points where (op* bump) is nonzero, with weights w * (op* bump)."""
    syms = kernel.syms
    op_star = operator_transpose(op_lifted)
    g = apply_operator_sympy(op_star, syms, bump.expr(syms))
    gfn = sp.lambdify(syms, g, modules="numpy")
    pts, wts = tensor_gl_grid(bump.box(), panels, nodes)
    gv = gfn(*pts.T)
    mask = gv != 0.0
    return pts[mask], wts[mask] * gv[mask]


def _translated_kernel_values(kernel: KernelSpec, pole: Sequence,
                              pts: np.ndarray) -> np.ndarray:
    """shape(pole^{-1} * z) on the grid, via the exact group operations."""
    lifted = kernel.lifted
    inv_pole = [float(v) for v in lifted.inverse_eval(
        [Fraction(v) for v in pole])]
    coords = [np.full(pts.shape[0], v) for v in inv_pole] + list(pts.T)
    args = [_poly_eval_arrays(m, coords) for m in lifted.mult]
    fn = sp.lambdify(kernel.syms, kernel.shape, modules="numpy")
    return fn(*args)


def calibration_residuals(kernel: KernelSpec, op_lifted: OperatorSpec,
                          poles: Optional[Sequence[Sequence[float]]] = None,
                          bump: Optional[BumpSpec] = None,
                          panels: int = 6, nodes: int = 10) -> List[float]:
    """|integral of kernel((pole)^{-1} z) (op* bump)(z) dz + bump(pole)|.

    The integral identity that defines a fundamental solution, tested at
    several poles inside the flat top of the bump.
    """
    lifted = kernel.lifted
    if bump is None:
        bump = BumpSpec((0.0,) * lifted.N)
    if poles is None:
        poles = _default_poles(lifted, bump)
    pts, gw = _lifted_bump_data(kernel, lifted, op_lifted, bump, panels, nodes)
    out = []
    for pole in poles:
        kv = _translated_kernel_values(kernel, pole, pts)
        val = kernel.calibration_constant * float(np.sum(kv * gw))
        out.append(abs(val + bump(pole)))
    return out


def _default_poles(lifted: LiftedSystem, bump: BumpSpec) -> List[List[float]]:
    r = 0.4 * bump.flat_radius
    zero = [float(c) for c in bump.center]
    p1 = list(zero)
    p1[0] += r
    p2 = list(zero)
    p2[-1] -= r
    return [zero, p1, p2]


def kernel_calibrate(shape: KernelSpec, lifted: LiftedSystem,
                     op_lifted: OperatorSpec,
                     bump: Optional[BumpSpec] = None,
                     panels: int = 6, nodes: int = 10,
                     check_tol: float = 1e-4) -> KernelSpec:
    """Fix the kernel constant by the left-inverse identity at the origin.

    Enforces integral(kernel * (op* bump)) = -bump(0) numerically, with a
    refined-grid consistency check as the oracle for quadrature quality.
    """
    if shape.lifted is not lifted:
        raise ValueError("kernel shape was built for a different lifting")
    if bump is None:
        bump = BumpSpec((0.0,) * lifted.N)
    pts, gw = _lifted_bump_data(shape, lifted, op_lifted, bump, panels, nodes)
    fn = sp.lambdify(shape.syms, shape.shape, modules="numpy")
    integral = float(np.sum(fn(*pts.T) * gw))
    pts2, gw2 = _lifted_bump_data(shape, lifted, op_lifted, bump,
                                  panels + 2, nodes + 2)
    integral2 = float(np.sum(fn(*pts2.T) * gw2))
    if abs(integral) < 1e-12 or \
            abs(integral - integral2) > check_tol * abs(integral2):
        raise ValueError(
            "calibration identity failed to converge; the kernel shape does "
            "not left-invert this operator")
    c = -bump((0.0,) * lifted.N) / integral2
    return shape.with_constant(c)


# -- the saturation evaluator ------------------------------------------------------


class SaturationEvaluator:
    """Evaluate Gamma and its derivatives by integrating the lifted kernel.

    Requires the operator order nu to be strictly below the homogeneous
    dimension q of the base space: that is the existence hypothesis for a
    dilation-homogeneous global fundamental solution, and construction is
    refused otherwise.
    """

    def __init__(self, lifted: LiftedSystem, operator: OperatorSpec,
                 kernel: KernelSpec,
                 config: Optional[QuadratureConfig] = None) -> None:
        if operator.nu >= lifted.q:
            raise ExistenceError(
                f"operator order nu={operator.nu} is not below the homogeneous "
                f"dimension q={lifted.q}; the existence hypothesis nu < q for "
                "a homogeneous global fundamental solution fails")
        if kernel.homogeneity_degree != operator.nu - lifted.Q:
            raise ValueError("kernel homogeneity degree does not match nu - Q")
        self.lifted = lifted
        self.operator = operator
        self.kernel = kernel
        self.config = config or QuadratureConfig()
        self.field_degrees = tuple(
            certify_homogeneity(X, lifted.base_delta, triangular=False)
            or X.declared_degree
            for X in lifted.base_fields)
        self._gauge_D = HomNorm(lifted.D_exponents)
        self._build_integrand_maps()
        self._fns: Dict[Tuple[str, Tuple[int, ...]], Callable] = {}
        self._sups: Dict[Tuple[str, Tuple[int, ...]], float] = {}
        E = lifted.E
        self._v1 = (2.0 ** lifted.p
                    * math.prod(gamma_fn(t + 1.0) for t in lifted.tau)
                    / gamma_fn(E + 1.0))

    # -- symbolic assembly ---------------------------------------------------

    def _build_integrand_maps(self) -> None:
        """G(x, y, zeta) = (y,0)^{-1} * (x, psi^{-1}(zeta)), exact polynomials.

        In the zeta coordinate the fiber gauge of the group element equals
        the gauge of zeta itself, which makes the closed-form tail bound
        exact; the change of variable is unimodular so values are unchanged.
        """
        lifted = self.lifted
        n, p = lifted.n, lifted.p
        nv = 2 * n + p
        allv = Poly.variables(nv)
        x = list(allv[:n])
        y = list(allv[n:2 * n])
        xi = list(allv[2 * n:])
        zero = [Poly.zero(nv)] * p
        inv_y0 = compose_map(lifted.inverse, y + zero)
        g_xi = compose_map(lifted.mult, inv_y0 + x + xi)
        sigma = lifted.base_delta.sigma
        degs = tuple(sigma) + tuple(sigma) + tuple(lifted.tau)
        psi_inv = invert_graded_map(x + y + list(g_xi[n:]), degs, degs)[2 * n:]
        self._g_maps = compose_map(g_xi, x + y + psi_inv)
        for j in range(p):
            if self._g_maps[n + j] != allv[2 * n + j]:
                raise AssertionError("slice normalization failed; lifting bug")
        xs = sp.symbols(f"x1:{n + 1}", real=True)
        ys = sp.symbols(f"y1:{n + 1}", real=True)
        cs = sp.symbols(f"c1:{p + 1}", real=True)
        self._arg_syms = tuple(xs) + tuple(ys) + tuple(cs)
        self._g_sym = [poly_to_sympy(m, self._arg_syms) for m in self._g_maps]

    def _integrand_fn(self, route: str, word: Tuple[int, ...]) -> Callable:
        key = (route, word)
        if key not in self._fns:
            expr = self.kernel.word_expr(word, star=(route == "star"))
            expr = expr.subs(dict(zip(self.kernel.syms, self._g_sym)),
                             simultaneous=True)
            fn = sp.lambdify(self._arg_syms, expr, modules="numpy")
            c = self.kernel.calibration_constant
            self._fns[key] = lambda *a: c * fn(*a)
        return self._fns[key]

    def _sup_bound(self, route: str, word: Tuple[int, ...]) -> float:
        key = (route, word)
        if key not in self._sups:
            cfg = self.config
            self._sups[key] = abs(self.kernel.calibration_constant) * \
                self.kernel.sup_on_gauge_sphere(
                    word, star=(route == "star"), n_samples=cfg.sup_samples,
                    seed=cfg.seed, safety=cfg.sup_safety)
        return self._sups[key]

    def _word_weight(self, word: Sequence[int]) -> int:
        return sum(self.field_degrees[i] for i in word)

    # -- core integration ------------------------------------------------------

    def _integral(self, route: str, word: Tuple[int, ...],
                  x: Sequence[float], y: Sequence[float],
                  rel_tol: Optional[float] = None,
                  radius_boost: float = 1.0) -> GammaRecord:
        lifted, cfg = self.lifted, self.config
        n, p = lifted.n, lifted.p
        rel = rel_tol if rel_tol is not None else cfg.rel_tol
        args = [float(v) for v in x] + [float(v) for v in y]
        origin = args + [0.0] * p
        g_at0 = [poly_eval(m, origin) for m in self._g_maps]
        g0 = hom_norm_eval(self._gauge_D, g_at0)
        if g0 <= 0.0:
            raise ValueError("pole: the two points coincide (x == y)")
        s_e = self.operator.nu - self._word_weight(word) - lifted.q
        t_const = self._sup_bound(route, word) * self._v1 \
            * 2.0 ** lifted.E / (1.0 - 2.0 ** s_e)
        fn = self._integrand_fn(route, word)
        if p == 1:
            return self._integral_1d(fn, args, g0, s_e, t_const, rel,
                                     radius_boost, route, word)
        return self._integral_nd(fn, args, g0, s_e, t_const, rel,
                                 radius_boost, route, word)

    def _integral_1d(self, fn, args, g0, s_e, t_const, rel, radius_boost,
                     route, word) -> GammaRecord:
        cfg = self.config

        def fz(z):
            return fn(*args, z)

        r0 = cfg.core_radius_factor * g0
        core, e1 = integrate.quad(
            fz, -r0, r0, points=[-g0, 0.0, g0], limit=cfg.max_subdivisions,
            epsrel=rel / 4.0, epsabs=cfg.abs_tol)
        target = max(cfg.abs_tol, rel * abs(core))
        radius = max((target / t_const) ** (1.0 / s_e),
                     cfg.min_radius_factor * g0) * radius_boost
        tail = t_const * radius ** s_e

        def fu(u):
            return fz(1.0 / u) / (u * u)

        pos, e2 = integrate.quad(fu, 1.0 / radius, 1.0 / r0,
                                 limit=cfg.max_subdivisions,
                                 epsrel=rel / 4.0, epsabs=target / 8.0)
        neg, e3 = integrate.quad(fu, -1.0 / r0, -1.0 / radius,
                                 limit=cfg.max_subdivisions,
                                 epsrel=rel / 4.0, epsabs=target / 8.0)
        return GammaRecord(core + pos + neg, e1 + e2 + e3 + tail, tail,
                           radius, "exact", route, tuple(word))

    def _integral_nd(self, fn, args, g0, s_e, t_const, rel, radius_boost,
                     route, word) -> GammaRecord:
        # multi-fiber fallback: adaptive quadrature on the bounding box of a
        # moderate gauge ball; accuracy is tail-limited, reported honestly
        cfg = self.config
        lifted = self.lifted
        radius = cfg.min_radius_factor * g0 * radius_boost
        tail = t_const * radius ** s_e
        ranges = [(-radius ** t, radius ** t) for t in lifted.tau]
        val, err = integrate.nquad(
            lambda *zeta: fn(*args, *zeta), ranges,
            opts={"epsrel": rel, "epsabs": max(cfg.abs_tol, tail / 10.0),
                  "limit": cfg.max_subdivisions})
        return GammaRecord(val, err + tail, tail, radius, "exact", route,
                           tuple(word))

    # -- public evaluation -----------------------------------------------------

    def gamma_record(self, x: Sequence[float], y: Sequence[float],
                     **kw) -> GammaRecord:
        return self._integral("plain", (), x, y, **kw)

    def gamma_eval(self, x: Sequence[float], y: Sequence[float]) -> float:
        return self.gamma_record(x, y).value

    def gamma_star_eval(self, x: Sequence[float], y: Sequence[float]) -> float:
        """Fundamental solution of the transposed operator."""
        return self._integral("star", (), x, y).value

    def gamma_x_derivative(self, word: Sequence[int], x: Sequence[float],
                           y: Sequence[float], **kw) -> float:
        return self._integral("plain", tuple(word), x, y, **kw).value

    def gamma_y_derivative(self, word: Sequence[int], x: Sequence[float],
                           y: Sequence[float], **kw) -> float:
        """Derivatives in the second argument, via the transposed kernel."""
        return self._integral("star", tuple(word), y, x, **kw).value

    def gamma_x_derivative_fd(self, word: Sequence[int], x: Sequence[float],
                              y: Sequence[float],
                              step: float = 1e-3) -> GammaRecord:
        """Central-difference fallback along the fields' integral curves.

        Lower accuracy than the exact sensitivities; the record is flagged.
        """
        word = tuple(word)

        def rec(w: Tuple[int, ...], pt: Sequence[float]) -> float:
            if not w:
                return self.gamma_eval(pt, y)
            X = self.lifted.base_fields[w[0]]
            fwd = exp_flow(X, pt, step)
            bwd = exp_flow(X, pt, -step)
            return (rec(w[1:], fwd) - rec(w[1:], bwd)) / (2.0 * step)

        val = rec(word, [float(v) for v in x])
        return GammaRecord(val, abs(val) * step ** 2 + step ** 2, 0.0, 0.0,
                           "fd", "plain", word)

    def xi_profile(self, x: Sequence[float], y: Sequence[float],
                   word: Sequence[int] = ()) -> Tuple[Callable, float, int]:
        """One-fiber integrand profile with its tail constant and exponent.

        Constructive integrability witness: |profile(z)| <= C * |z|^{s/tau}
        for large z and the tail beyond R is below C' * R^{s + E}.
        """
        word = tuple(word)
        fn = self._integrand_fn("plain", word)
        args = [float(v) for v in x] + [float(v) for v in y]
        s_e = self.operator.nu - self._word_weight(word) - self.lifted.q
        t_const = self._sup_bound("plain", word) * self._v1 \
            * 2.0 ** self.lifted.E / (1.0 - 2.0 ** s_e)
        return (lambda z: fn(*args, z)), t_const, s_e

    # -- verification harnesses --------------------------------------------------

    def verify_homogeneity(self, pairs: Sequence[Tuple[Sequence, Sequence]],
                           lambdas: Sequence[float]) -> float:
        """Max relative deviation from joint scaling of degree nu - q."""
        sigma = self.lifted.base_delta.sigma
        deg = self.operator.nu - self.lifted.q
        worst = 0.0
        for x, y in pairs:
            base = self.gamma_eval(x, y)
            for lam in lambdas:
                xs = [lam ** s * v for s, v in zip(sigma, x)]
                ys = [lam ** s * v for s, v in zip(sigma, y)]
                dev = abs(self.gamma_eval(xs, ys) - lam ** deg * base)
                worst = max(worst, dev / abs(base))
        return worst

    def verify_symmetry(self, pairs: Sequence[Tuple[Sequence, Sequence]],
                        star: bool = False) -> float:
        """Max relative |Gamma(x,y) - Gamma(y,x)| (or against the star route)."""
        worst = 0.0
        for x, y in pairs:
            a = self.gamma_eval(x, y)
            b = self.gamma_star_eval(y, x) if star else self.gamma_eval(y, x)
            worst = max(worst, abs(a - b) / max(abs(a), abs(b)))
        return worst

    def tail_doubling_check(
            self, pairs: Sequence[Tuple[Sequence, Sequence]]
    ) -> List[Tuple[float, float, bool]]:
        """Doubling the truncation radius moves values less than the bound."""
        out = []
        for x, y in pairs:
            r1 = self.gamma_record(x, y)
            r2 = self.gamma_record(x, y, radius_boost=2.0)
            delta = abs(r1.value - r2.value)
            bound = r1.error_bound + r2.error_bound
            out.append((delta, bound, delta <= bound))
        return out

    def verify_left_inverse(self, bump: BumpSpec, y: Sequence[float],
                            panels: int = 8, nodes: int = 10,
                            gamma_rel_tol: float = 1e-6) -> float:
        """|integral of Gamma(x, y) (op* bump)(x) dx + bump(y)|."""
        n = self.lifted.n
        if len(bump.center) != n:
            raise ValueError("bump dimension does not match the base space")
        xs = sp.symbols(f"u1:{n + 1}", real=True)
        op_star = operator_transpose(self.operator)
        g = apply_operator_sympy(op_star, xs, bump.expr(xs))
        gfn = sp.lambdify(xs, g, modules="numpy")
        pts, wts = tensor_gl_grid(bump.box(), panels, nodes)
        gv = gfn(*pts.T)
        mask = gv != 0.0
        total = 0.0
        yf = [float(v) for v in y]
        for pt, gw in zip(pts[mask], wts[mask] * gv[mask]):
            total += gw * self.gamma_record(pt, yf,
                                            rel_tol=gamma_rel_tol).value
        return abs(total + bump(yf))


# -- module-level operation wrappers -------------------------------------------

def gamma_eval(ev: SaturationEvaluator, x: Sequence[float],
               y: Sequence[float]) -> float:
    return ev.gamma_eval(x, y)


def gamma_x_derivative(ev: SaturationEvaluator, word: Sequence[int],
                       x: Sequence[float], y: Sequence[float]) -> float:
    return ev.gamma_x_derivative(word, x, y)


def verify_left_inverse(ev: SaturationEvaluator, phi: BumpSpec,
                        y: Sequence[float], **kw) -> float:
    return ev.verify_left_inverse(phi, y, **kw)


def verify_homogeneity(ev: SaturationEvaluator, pairs, lambdas) -> float:
    return ev.verify_homogeneity(pairs, lambdas)
