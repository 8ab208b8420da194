"""Bracket-generated nilpotent Lie algebras of homogeneous vector fields.

Starting from certified homogeneous fields, breadth-first bracketing produces
a finite graded basis (termination is guaranteed because a bracket of total
degree above the top dilation exponent must vanish).  Linear independence is
decided exactly over the rationals: a polynomial vector field is flattened to
its vector of monomial coefficients, one slot per (coordinate, monomial)
pair, and Gaussian elimination runs on Fractions.

The basis ordering is part of the public contract: non-decreasing degree,
with the original generators first within their degree, then insertion order.
Structure constants are computed against that ordering and carry exact
antisymmetry, grading and Jacobi guarantees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .fields import DilationFamily, PolyVectorField, certify_homogeneity, commutator
from .poly import Poly

Key = Tuple[int, Tuple[int, ...]]  # (coordinate index, monomial)


def _flatten(X: PolyVectorField) -> Dict[Key, Fraction]:
    vec: Dict[Key, Fraction] = {}
    for i, p in enumerate(X.coeffs):
        for mono, c in p.terms.items():
            vec[(i, mono)] = c
    return vec


class _RationalSpan:
    """Incremental row-reduced span of exact coefficient vectors."""

    def __init__(self) -> None:
        self.rows: List[Dict[Key, Fraction]] = []
        self.pivots: List[Key] = []

    @staticmethod
    def _pivot(vec: Dict[Key, Fraction]) -> Optional[Key]:
        return min(vec) if vec else None

    def reduce(self, vec: Dict[Key, Fraction]) -> Dict[Key, Fraction]:
        out = dict(vec)
        for row, piv in zip(self.rows, self.pivots):
            c = out.get(piv)
            if c:
                for k, v in row.items():
                    nv = out.get(k, Fraction(0)) - c * v
                    if nv:
                        out[k] = nv
                    else:
                        out.pop(k, None)
        return out

    def contains(self, vec: Dict[Key, Fraction]) -> bool:
        return not self.reduce(vec)

    def insert(self, vec: Dict[Key, Fraction]) -> bool:
        """Add vec to the span; False if it was already in the span."""
        red = self.reduce(vec)
        if not red:
            return False
        piv = self._pivot(red)
        inv = Fraction(1) / red[piv]
        red = {k: v * inv for k, v in red.items()}
        self.rows.append(red)
        self.pivots.append(piv)
        return True

    @property
    def rank(self) -> int:
        return len(self.rows)


def _solve_in_basis(basis_vecs: List[Dict[Key, Fraction]],
                    target: Dict[Key, Fraction]) -> Optional[List[Fraction]]:
    """Exact coordinates of target in the span of basis_vecs, or None."""
    n = len(basis_vecs)
    keys = sorted(set().union(*basis_vecs, target) if basis_vecs or target else set())
    # rows: coefficients of the unknowns plus the right-hand side
    rows = [[vec.get(k, Fraction(0)) for vec in basis_vecs] + [target.get(k, Fraction(0))]
            for k in keys]
    pivot_col_of_row: List[int] = []
    r = 0
    for col in range(n):
        sel = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if sel is None:
            continue
        rows[r], rows[sel] = rows[sel], rows[r]
        inv = Fraction(1) / rows[r][col]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivot_col_of_row.append(col)
        r += 1
    # consistency: no nonzero right-hand side below the pivot rows
    for i in range(r, len(rows)):
        if rows[i][n] != 0:
            return None
    sol = [Fraction(0)] * n
    for i, col in enumerate(pivot_col_of_row):
        sol[col] = rows[i][n]
    return sol


@dataclass(frozen=True)
class LieBasis:
    """Graded basis W_1, ..., W_N of the bracket-generated algebra."""

    W: Tuple[PolyVectorField, ...]
    degrees: Tuple[int, ...]
    generator_indices: Tuple[int, ...]

    @property
    def N(self) -> int:
        return len(self.W)

    @property
    def nvars(self) -> int:
        return self.W[0].nvars


@dataclass(frozen=True)
class StructureConstants:
    """Table c with [W_i, W_j] = Sum_k c[i][j][k] W_k, stored for i < j."""

    N: int
    table: Tuple[Tuple[int, int, int, Fraction], ...]  # entries (i, j, k, c), i < j

    def entry_map(self) -> Dict[Tuple[int, int], Dict[int, Fraction]]:
        out: Dict[Tuple[int, int], Dict[int, Fraction]] = {}
        for i, j, k, c in self.table:
            out.setdefault((i, j), {})[k] = c
        return out

    def bracket(self, u: Sequence, v: Sequence) -> list:
        """Coordinates of [u, v]; entries may be Fractions or Polys."""
        out: list = [None] * self.N
        for i, j, k, c in self.table:
            contrib = c * (u[i] * v[j] - u[j] * v[i])
            out[k] = contrib if out[k] is None else out[k] + contrib
        zero = Fraction(0)
        if any(isinstance(e, Poly) for e in list(u) + list(v)):
            nv = next(e.nvars for e in list(u) + list(v) if isinstance(e, Poly))
            zero = Poly.zero(nv)
        return [zero if e is None else e for e in out]

    def to_json(self) -> str:
        rows = [{"i": i + 1, "j": j + 1, "k": k + 1, "c": str(c)}
                for i, j, k, c in self.table]
        return json.dumps(rows, sort_keys=True)


def generate_lie_algebra(fields: Sequence[PolyVectorField],
                         delta: DilationFamily) -> Tuple[LieBasis, StructureConstants]:
    """Bracket closure of the given fields with exact structure constants."""
    gens = []
    for j, X in enumerate(fields):
        nu = X.declared_degree
        if nu is None:
            nu = certify_homogeneity(X, delta)
        if nu is None:
            raise ValueError(f"generator X{j + 1} is not dilation-homogeneous")
        gens.append(PolyVectorField(X.nvars, X.coeffs, nu))

    span = _RationalSpan()
    elements: List[PolyVectorField] = []
    is_gen: List[bool] = []
    for j, X in enumerate(gens):
        if not span.insert(_flatten(X)):
            raise ValueError(f"generator X{j + 1} is linearly dependent on earlier generators")
        elements.append(X)
        is_gen.append(True)

    max_degree = max(delta.sigma)
    frontier = list(range(len(elements)))
    while frontier:
        new_frontier: List[int] = []
        for a in range(len(elements)):
            for b in frontier:
                if a == b:
                    continue
                Xa, Xb = elements[a], elements[b]
                deg = Xa.declared_degree + Xb.declared_degree
                if deg > max_degree:
                    continue
                Z = commutator(Xa, Xb)
                if Z.is_zero():
                    continue
                nu = certify_homogeneity(Z, delta)
                if nu is None or nu != deg:
                    raise ValueError("bracket of homogeneous fields failed certification; "
                                     "internal inconsistency")
                if span.insert(_flatten(Z)):
                    elements.append(PolyVectorField(Z.nvars, Z.coeffs, nu))
                    is_gen.append(False)
                    new_frontier.append(len(elements) - 1)
        frontier = new_frontier

    order = sorted(range(len(elements)),
                   key=lambda idx: (elements[idx].declared_degree, not is_gen[idx], idx))
    W = tuple(elements[idx] for idx in order)
    degrees = tuple(X.declared_degree for X in W)
    generator_indices = tuple(order.index(idx) for idx in range(len(gens)))
    basis = LieBasis(W, degrees, generator_indices)

    basis_vecs = [_flatten(X) for X in W]
    table: List[Tuple[int, int, int, Fraction]] = []
    N = len(W)
    for i in range(N):
        for j in range(i + 1, N):
            Z = commutator(W[i], W[j])
            coords = _solve_in_basis(basis_vecs, _flatten(Z))
            if coords is None:
                raise ValueError("bracket escapes the computed span; closure bug")
            for k, c in enumerate(coords):
                if c != 0:
                    if degrees[k] != degrees[i] + degrees[j]:
                        raise ValueError("structure constants violate the grading")
                    table.append((i, j, k, c))
    sc = StructureConstants(N, tuple(table))
    _check_jacobi(sc)
    return basis, sc


def _check_jacobi(sc: StructureConstants) -> None:
    N = sc.N
    basis_vectors = [[Fraction(int(i == k)) for i in range(N)] for k in range(N)]
    for a in range(N):
        for b in range(a + 1, N):
            for c in range(b + 1, N):
                ea, eb, ec = basis_vectors[a], basis_vectors[b], basis_vectors[c]
                total = [
                    x + y + z for x, y, z in zip(
                        sc.bracket(ea, sc.bracket(eb, ec)),
                        sc.bracket(eb, sc.bracket(ec, ea)),
                        sc.bracket(ec, sc.bracket(ea, eb)))
                ]
                if any(v != 0 for v in total):
                    raise ValueError("Jacobi identity fails; structure constants corrupt")


def hormander_rank(basis: LieBasis, point: Sequence) -> int:
    """Rank over the rationals of the basis fields evaluated at the point."""
    point = [Fraction(v) for v in point]
    span = _RationalSpan()
    for X in basis.W:
        vals = X.eval_at(point)
        vec = {(i, ()): Fraction(v) for i, v in enumerate(vals) if v != 0}
        span.insert(vec)
    return span.rank


def nilpotency_step(sc: StructureConstants, degrees: Sequence[int]) -> int:
    """Length of the lower central series; asserted <= max degree."""
    N = sc.N
    unit = [[Fraction(int(i == k)) for i in range(N)] for k in range(N)]
    current = list(unit)
    step = 1
    while True:
        span = _RationalSpan()
        nxt = []
        for e in unit:
            for v in current:
                w = sc.bracket(e, v)
                vec = {(i, ()): c for i, c in enumerate(w) if c != 0}
                if vec and span.insert(vec):
                    nxt.append(w)
        if not nxt:
            break
        current = nxt
        step += 1
    if degrees and step > max(degrees):
        raise AssertionError("nilpotency step exceeds the top homogeneity degree")
    return step
