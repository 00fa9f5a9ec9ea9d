"""Measuring convergence orders by matrix propagation (desk-scale).

The partition function at inverse temperature beta is recovered as the
trace of the (n+1)-th power of the discretized kernel at beta/(n+1). The
log-ratio diagnostic alpha_m grows linearly in m with slope equal to the
convergence order, so fitting its tail reads the order straight off a run.

This is a reduced-scale version of the quartic-oscillator benchmark (the
acceptance suite runs the full ladders): expect slopes near 2 for the
endpoint splitting kernel and near 3 for the third-order system.
"""

import time

from rwpath import (
    DiscreteReweightedKernel,
    PhysicalParams,
    SpatialGrid,
    TrotterKernel,
    calibrated_system,
    order_diagnostic,
    quartic,
    reference_z,
)

params = PhysicalParams(beta=10.0)
grid = SpatialGrid(-4.0, 4.0, 300)
pot = quartic()

t0 = time.perf_counter()
s4, r4 = calibrated_system("order4-discrete")
reference = reference_z(DiscreteReweightedKernel(s4, pot, r4), params, grid, 511)
print(
    f"reference Z = {reference.value:.10e}"
    f" (eigensolve gap {reference.rel_gap:.1e}, {time.perf_counter() - t0:.0f}s)"
)

s3, r3 = calibrated_system("order3-discrete")
for label, kernel, m_max in [
    ("endpoint splitting", TrotterKernel(pot), 25),
    ("third-order system", DiscreteReweightedKernel(s3, pot, r3), 25),
]:
    t0 = time.perf_counter()
    series = order_diagnostic(kernel, params, grid, range(1, m_max + 1), reference.value)
    print(f"\n{label}: fitted slope {series.slope:.3f} over m in {series.fit_window}"
          f" ({time.perf_counter() - t0:.0f}s)")
    print("  m      Z_{2m+1}            alpha_m")
    shown = dict(zip(series.alpha_m_index.tolist(), series.alpha_m.tolist()))
    for i, m in enumerate(series.m.tolist()):
        if m % 5 == 0 and m in shown:
            print(f"  {m:<6d}{series.z[i]:<20.12e}{shown[m]:.4f}")
