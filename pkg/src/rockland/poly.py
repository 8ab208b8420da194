"""Exact sparse multivariate polynomial arithmetic over the rationals.

A polynomial is a finite map from monomial exponent tuples to Fraction
coefficients, together with the ambient number of variables.  The ambient
dimension is carried explicitly so that values living on different spaces
cannot be mixed silently.  Zero coefficients are never stored, which makes
equality testing exact and canonical.

Beyond ring arithmetic the module provides the dilation-graded degree
bookkeeping used throughout the package: a monomial x^alpha has graded degree
sum(alpha_i * sigma_i) for a vector of positive integer weights sigma, and a
polynomial is graded-homogeneous when all its monomials share one graded
degree.

Serialization uses graded-lexicographic term order with rationals printed as
"p/q", so rendered polynomials are deterministic and usable as golden values.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Dict, Iterable, Mapping, Sequence, Tuple, Union

Exponent = Tuple[int, ...]
Scalar = Union[int, Fraction]

_ZERO = Fraction(0)


class Poly:
    """Immutable sparse polynomial with Fraction coefficients."""

    __slots__ = ("nvars", "terms", "_hash")

    nvars: int
    terms: Dict[Exponent, Fraction]

    def __init__(self, nvars: int, terms: Mapping[Exponent, Scalar]):
        if nvars < 0:
            raise ValueError(f"nvars must be non-negative, got {nvars}")
        clean: Dict[Exponent, Fraction] = {}
        for mono, coeff in terms.items():
            if len(mono) != nvars:
                raise ValueError(f"monomial {mono} has wrong length for nvars={nvars}")
            c = Fraction(coeff)
            if c != 0:
                clean[mono] = c
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Poly is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Poly":
        return Poly(nvars, {})

    @staticmethod
    def const(nvars: int, value: Scalar) -> "Poly":
        return Poly(nvars, {(0,) * nvars: Fraction(value)})

    @staticmethod
    def var(nvars: int, idx: int) -> "Poly":
        """The coordinate polynomial x_idx (0-based index)."""
        if not 0 <= idx < nvars:
            raise ValueError(f"variable index {idx} out of range for nvars={nvars}")
        exp = [0] * nvars
        exp[idx] = 1
        return Poly(nvars, {tuple(exp): Fraction(1)})

    @staticmethod
    def variables(nvars: int) -> Tuple["Poly", ...]:
        return tuple(Poly.var(nvars, i) for i in range(nvars))

    @staticmethod
    def monomial(nvars: int, exponents: Sequence[int], coeff: Scalar = 1) -> "Poly":
        exp = tuple(exponents)
        if len(exp) != nvars or any(e < 0 for e in exp):
            raise ValueError(f"bad exponent tuple {exp} for nvars={nvars}")
        return Poly(nvars, {exp: Fraction(coeff)})

    # -- ring operations -----------------------------------------------------

    def _check_same_space(self, other: "Poly") -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"dimension mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other: Union["Poly", Scalar]) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        self._check_same_space(other)
        out = dict(self.terms)
        for mono, coeff in other.terms.items():
            out[mono] = out.get(mono, _ZERO) + coeff
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: Union["Poly", Scalar]) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "Poly":
        return Poly.const(self.nvars, other) - self

    def __mul__(self, other: Union["Poly", Scalar]) -> "Poly":
        if not isinstance(other, Poly):
            c = Fraction(other)
            return Poly(self.nvars, {m: c * v for m, v in self.terms.items()})
        self._check_same_space(other)
        out: Dict[Exponent, Fraction] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                mono = tuple(x + y for x, y in zip(ma, mb))
                out[mono] = out.get(mono, _ZERO) + ca * cb
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poly):
            if isinstance(other, (int, Fraction)):
                return self == Poly.const(self.nvars, other)
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self) -> int:
        h = object.__getattribute__(self, "_hash")
        if h is None:
            h = hash((self.nvars, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __repr__(self) -> str:
        return f"Poly({self.nvars}, {to_string(self)!r})"


def poly_mul(a: Poly, b: Poly) -> Poly:
    """Exact product a*b."""
    return a * b


def poly_diff(a: Poly, i: int) -> Poly:
    """Exact partial derivative with respect to x_i (0-based index)."""
    if not 0 <= i < a.nvars:
        raise ValueError(f"variable index {i} out of range for nvars={a.nvars}")
    out: Dict[Exponent, Fraction] = {}
    for mono, coeff in a.terms.items():
        e = mono[i]
        if e == 0:
            continue
        new = list(mono)
        new[i] = e - 1
        key = tuple(new)
        out[key] = out.get(key, _ZERO) + coeff * e
    return Poly(a.nvars, out)


def poly_eval(a: Poly, point: Sequence) -> object:
    """Evaluate at a point; exact Fraction output for rational input.

    Accepts Fractions/ints (exact) or floats (float output).  The point must
    have one entry per variable.
    """
    if len(point) != a.nvars:
        raise ValueError(f"point length {len(point)} != nvars {a.nvars}")
    exact = all(isinstance(v, (int, Fraction)) for v in point)
    total = Fraction(0) if exact else 0.0
    for mono, coeff in a.terms.items():
        term = coeff if exact else float(coeff)
        for e, v in zip(mono, point):
            if e:
                term = term * v ** e
        total = total + term
    return total


def graded_degree_of_monomial(mono: Exponent, sigma: Sequence[int]) -> int:
    return sum(e * s for e, s in zip(mono, sigma))


def graded_components(a: Poly, sigma: Sequence[int]) -> Dict[int, Poly]:
    """Split a into graded-homogeneous parts keyed by graded degree."""
    if len(sigma) != a.nvars or any(s <= 0 for s in sigma):
        raise ValueError(f"bad weight vector {tuple(sigma)} for nvars={a.nvars}")
    buckets: Dict[int, Dict[Exponent, Fraction]] = {}
    for mono, coeff in a.terms.items():
        d = graded_degree_of_monomial(mono, sigma)
        buckets.setdefault(d, {})[mono] = coeff
    return {d: Poly(a.nvars, t) for d, t in sorted(buckets.items())}


def is_graded_homogeneous(a: Poly, sigma: Sequence[int], d: int) -> bool:
    """True iff every monomial of a has graded degree d (true for 0)."""
    comps = graded_components(a, sigma)
    return not comps or set(comps) == {d}


def graded_degree(a: Poly, sigma: Sequence[int]) -> int:
    """Maximal graded degree over the monomials of a (0 for the zero poly)."""
    if not a.terms:
        return 0
    return max(graded_degree_of_monomial(m, sigma) for m in a.terms)


def substitute(a: Poly, images: Sequence[Poly]) -> Poly:
    """Compose: replace variable x_i of a by images[i].

    All images must live in one common ambient space; the result lives there.
    """
    if len(images) != a.nvars:
        raise ValueError(f"need {a.nvars} images, got {len(images)}")
    if a.nvars == 0:
        raise ValueError("cannot substitute into a polynomial with no variables")
    nv = images[0].nvars
    for g in images:
        if g.nvars != nv:
            raise ValueError("substitution images live in different spaces")
    # cache powers of each image as they are needed
    powers: Dict[Tuple[int, int], Poly] = {}

    def power(i: int, k: int) -> Poly:
        key = (i, k)
        if key not in powers:
            powers[key] = images[i] ** k
        return powers[key]

    result = Poly.zero(nv)
    for mono, coeff in a.terms.items():
        term = Poly.const(nv, coeff)
        for i, e in enumerate(mono):
            if e:
                term = term * power(i, e)
        result = result + term
    return result


def embed(a: Poly, new_nvars: int, var_map: Sequence[int] | None = None) -> Poly:
    """Reinterpret a in a larger space; variable i of a becomes var_map[i].

    With var_map omitted, variable indices are kept (the new trailing
    variables simply do not occur).
    """
    if var_map is None:
        var_map = list(range(a.nvars))
    if len(var_map) != a.nvars or any(not 0 <= j < new_nvars for j in var_map):
        raise ValueError("bad variable map for embedding")
    out: Dict[Exponent, Fraction] = {}
    for mono, coeff in a.terms.items():
        new = [0] * new_nvars
        for i, e in enumerate(mono):
            new[var_map[i]] += e
        key = tuple(new)
        out[key] = out.get(key, _ZERO) + coeff
    return Poly(new_nvars, out)


def depends_on(a: Poly, i: int) -> bool:
    """True iff variable x_i occurs in some monomial of a."""
    return any(mono[i] for mono in a.terms)


def _grlex_key(mono: Exponent) -> Tuple:
    # graded-lex: total degree first, then lexicographic on exponents
    return (sum(mono), mono)


def sorted_terms(a: Poly) -> Iterable[Tuple[Exponent, Fraction]]:
    """Terms in canonical (descending graded-lex) order."""
    return sorted(a.terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def to_string(a: Poly, var_names: Sequence[str] | None = None) -> str:
    """Deterministic textual form, e.g. "2*x1^2*x2 - 1/3*x2"."""
    if var_names is None:
        var_names = [f"x{i + 1}" for i in range(a.nvars)]
    if not a.terms:
        return "0"
    pieces = []
    for mono, coeff in sorted_terms(a):
        factors = []
        for i, e in enumerate(mono):
            if e == 1:
                factors.append(var_names[i])
            elif e > 1:
                factors.append(f"{var_names[i]}^{e}")
        mag = _format_coeff(abs(coeff))
        if factors and mag == "1":
            body = "*".join(factors)
        elif factors:
            body = mag + "*" + "*".join(factors)
        else:
            body = mag
        sign = "-" if coeff < 0 else "+"
        pieces.append((sign, body))
    first_sign, first_body = pieces[0]
    text = ("-" if first_sign == "-" else "") + first_body
    for sign, body in pieces[1:]:
        text += f" {sign} {body}"
    return text


def map_coeffs(a: Poly, fn: Callable[[Fraction], Scalar]) -> Poly:
    return Poly(a.nvars, {m: Fraction(fn(c)) for m, c in a.terms.items()})
