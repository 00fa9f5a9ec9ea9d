"""Test potentials with values, first derivatives, and domain metadata.

The quartic oscillator and the helium cage are the two benchmark systems;
the harmonic oscillator is kept as an analytic cross-check (its density
matrix and partition function are known in closed form). Outside its domain
a potential evaluates to +inf, which downstream kernels map to zero density
rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["Potential", "quartic", "harmonic", "he_cage", "custom_potential"]


@dataclass(frozen=True)
class Potential:
    """A one-dimensional potential: vectorized value and first derivative,
    an open domain interval, and the defining parameters."""

    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    deriv1: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    params: dict

    def __call__(self, x):
        return self.value(x)


def quartic() -> Potential:
    """V(x) = x^4 / 2 on the whole line."""

    def value(x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        return 0.5 * x2 * x2

    def deriv1(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x * x * x

    return Potential("quartic", value, deriv1, (-np.inf, np.inf), {})


def harmonic(omega: float, mass: float = 1.0) -> Potential:
    """V(x) = m omega^2 x^2 / 2; the analytic-reference oscillator."""
    if omega <= 0:
        raise ValueError("omega must be positive")

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * mass * omega**2 * x**2

    def deriv1(x):
        x = np.asarray(x, dtype=float)
        return mass * omega**2 * x

    return Potential("harmonic", value, deriv1, (-np.inf, np.inf), {"omega": omega, "mass": mass})


def he_cage(
    eps: float = 10.22, sigma_lj: float = 2.556, box: float = 7.153
) -> Potential:
    """A particle trapped between two fixed atoms a distance ``box`` apart,
    interacting with each through a pairwise Lennard-Jones potential.

    Parameters default to the helium system in kelvin/angstrom units:
    well depth eps = 10.22 K, sigma_lj = 2.556 A, box = 7.153 A. The value
    is +inf outside the open interval (0, box).
    """

    def _pow6(t):
        t2 = t * t
        return t2 * t2 * t2

    def _lj_terms(x):
        # y^6*(y^6 - 1) form avoids inf - inf at the walls
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            y6 = _pow6(sigma_lj / x)
            z6 = _pow6(sigma_lj / (x - box))
        return y6, z6

    def value(x):
        x = np.asarray(x, dtype=float)
        y6, z6 = _lj_terms(x)
        with np.errstate(over="ignore", invalid="ignore"):
            v = 4.0 * eps * (y6 * (y6 - 1.0) + z6 * (z6 - 1.0))
        out = np.where((x > 0.0) & (x < box), v, np.inf)
        return float(out) if out.ndim == 0 else out

    def deriv1(x):
        x = np.asarray(x, dtype=float)
        y6, z6 = _lj_terms(x)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            d = 4.0 * eps * (
                (-12.0 * y6 * y6 + 6.0 * y6) / x + (-12.0 * z6 * z6 + 6.0 * z6) / (x - box)
            )
        out = np.where((x > 0.0) & (x < box), d, np.inf)
        return float(out) if out.ndim == 0 else out

    return Potential(
        "he-cage",
        value,
        deriv1,
        (0.0, box),
        {"eps": eps, "sigma_lj": sigma_lj, "box": box},
    )


def custom_potential(value, deriv1, domain=(-np.inf, np.inf), params=None) -> Potential:
    """Wrap user code as a potential (code-only; not loadable from config)."""
    return Potential("custom", value, deriv1, tuple(domain), dict(params or {}))
