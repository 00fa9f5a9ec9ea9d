"""Calibrating the path-system constants.

A reweighted path system replaces the Brownian bridge with a couple of
closed-form bridge functions. One scalar condition (the squared centroid sum
hitting 1/12) fixes the third-order family's rotation rate; a pair of
conditions (zero mean of the second bridge function plus a Gram square-sum
hitting 1/6) fixes the two constants of the fourth-order family. Each family
has a continuous variant (exact time integrals) and a discrete variant
(a minimal palindromic quadrature with two or four points).

Running this script solves all four systems from scratch and prints the
constants next to their ten-digit reference values.
"""

from rwpath import FAMILIES, calibrate, residual_order3, residual_order4
from rwpath.quadrature import gauss_legendre_01

REFERENCE = {
    "order3-continuous": (3.056620471,),
    "order3-discrete": (2.720699046,),
    "order4-continuous": (5.768064999, 13.49214669),
    "order4-discrete": (6.379716466, 8.160188248),
}

print("family                 constants                                reference")
for family in FAMILIES:
    result = calibrate(family)
    got = ", ".join(f"{c:.9f}" for c in result.constants)
    want = ", ".join(f"{c:.9f}" for c in REFERENCE[family])
    print(f"{family:<22} {got:<40} {want}")
    print(f"{'':<22} residual norm {result.residual_norm:.2e} in {result.iterations} iterations")

print()
print("Residuals evaluated at the reference constants themselves:")
print("  order3 continuous:", f"{residual_order3(3.056620471):+.2e}")
print("  order3 discrete:  ", f"{residual_order3(2.720699046, gauss_legendre_01(2)):+.2e}")
print("  order4 continuous:", [f"{r:+.2e}" for r in residual_order4(5.768064999, 13.49214669)])
print(
    "  order4 discrete:  ",
    [f"{r:+.2e}" for r in residual_order4(6.379716466, 8.160188248, gauss_legendre_01(4))],
)

print()
print("A single sqrt-envelope bridge function cannot reach the target:")
from rwpath.quadrature import composite_legendre_01, integrate_01
import numpy as np

rule = composite_legendre_01(64, 8, sqrt_endpoints=True)
centroid_sq = integrate_01(rule, lambda u: np.sqrt(u * (1 - u))) ** 2
print(f"  squared centroid of sqrt(u(1-u)) = {centroid_sq:.9f} (pi^2/64), target 1/12 = {1/12:.9f}")
