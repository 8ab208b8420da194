"""Walk through the symbolic pipeline on the Grushin plane.

The fields X1 = d/dx1 and X2 = x1 d/dx2 generate a step-2 algebra whose
lifted group is the Heisenberg group on R^3.  Everything here is exact
rational arithmetic; no floating point is involved.
"""

from fractions import Fraction

from rockland import (
    DilationFamily,
    Poly,
    PolyVectorField,
    build_lifting,
    generate_lie_algebra,
    make_standard_operator,
    saturable_check,
    slice_diffeos,
)

delta = DilationFamily((1, 2))
z = Poly.zero(2)
X1 = PolyVectorField(2, (Poly.const(2, 1), z))
X2 = PolyVectorField(2, (z, Poly.var(2, 0)))

print("== algebra generation")
basis, sc = generate_lie_algebra([X1, X2], delta)
print(f"basis size N = {basis.N}, degrees {basis.degrees}")
for i, W in enumerate(basis.W):
    print(f"  W{i + 1}: degree {basis.degrees[i]}")

print("\n== lifting")
lifted = build_lifting(basis, sc, delta)
print(f"n = {lifted.n}, p = {lifted.p}, q = {lifted.q}, Q = {lifted.Q}")
print("group dilation exponents:", lifted.D_exponents)
print("residual directions (must be xi-only):")
for name, R in zip(("R1", "R2"), lifted.residuals()):
    nz = [j + 1 for j, c in enumerate(R.coeffs) if not c.is_zero()]
    print(f"  {name} acts on coordinates {nz}")

print("\n== exact group law at rational points")
a = [Fraction(1), Fraction(0), Fraction(1, 2)]
b = [Fraction(0), Fraction(1), Fraction(-1, 3)]
print("a * b =", lifted.mult_eval(a, b))
print("a * a^{-1} =", lifted.mult_eval(a, lifted.inverse_eval(a)))

print("\n== slice diffeomorphisms")
sm = slice_diffeos(lifted)
print(f"det J_psi = {sm.det_psi}, det J_phi = {sm.det_phi}")

print("\n== saturability of the sublaplacian")
gens = [basis.W[i] for i in basis.generator_indices]
L = make_standard_operator("sublaplacian_power", gens, k=1)
rep = saturable_check(L, lifted)
print("every summand differentiates in xi:", rep.all_differentiate_in_xi)
print("coefficient degree bounds hold:   ", rep.degree_bounds_hold)
