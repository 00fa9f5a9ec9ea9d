"""Moment identities behind the convergence order.

An approximation built from a finite path system has convergence order nu
exactly when the mixed moments of (endpoint value, time-averaged path
powers) agree with the Brownian values for every index up to nu. The index
count per level equals the integer-partition numbers 2, 5, 11, 22, ...,
which is why high orders get expensive fast.

The script prints the verification table for the calibrated fourth-order
discrete system, then shows the four identities that the plain endpoint
splitting (trapezoidal) rule gets wrong - the reason it is stuck at second
order.
"""

from rwpath import (
    calibrated_system,
    continuous_spec,
    discrete_spec,
    enumerate_indices,
    finite_kernel,
    verify_order,
)
from rwpath.quadrature import endpoint_trapezoid

print("indices per level:", {mu: len(enumerate_indices(mu)) for mu in (1, 2, 3, 4)})
print()

system, rule = calibrated_system("order4-discrete")
report = verify_order(discrete_spec(finite_kernel(system), rule), 4)
print(f"order-4 discrete system, all identities up to level 4: pass={report.passed}")
print(f"largest residual: {report.max_residual:.2e} (tolerance {report.tol:.0e})")
print()

beyond = verify_order(discrete_spec(finite_kernel(system), rule), 5, tol=1e-4)
print(f"the same system at level 5: pass={beyond.passed} "
      f"(largest residual {beyond.max_residual:.2e} - the order is exactly 4)")
print()

trotter = discrete_spec(finite_kernel(system), endpoint_trapezoid())
report = verify_order(trotter, 3)
print("endpoint splitting rule at level 3:")
print(f"{'index':<18}{'brownian':>12}{'splitting':>12}{'residual':>12}")
for entry in report.violations:
    print(
        f"{entry.index.label():<18}{entry.lhs:>12.6f}{entry.rhs:>12.6f}{entry.residual:>12.6f}"
    )
print(f"... and the remaining {len(report.entries) - len(report.violations)} identities hold exactly.")
