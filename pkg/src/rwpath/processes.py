"""Finite-dimensional Gaussian path systems and their covariance kernels.

A path system is a family of bridge functions that, together with the
reference profile u -> u, defines a finite Gaussian process standing in
for Brownian motion on [0, 1]. The module also provides the exact
Brownian reference kernel min(u, v), the dyadic tent functions, and the
composed paths obtained by chaining a system across 2^k subintervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Bridge = Callable[[np.ndarray], np.ndarray]


def _sqrt_env(u: np.ndarray) -> np.ndarray:
    # clip guards float noise just outside [0, 1]
    return np.sqrt(np.clip(u * (1.0 - u), 0.0, None))


@dataclass(frozen=True)
class LambdaSystem:
    """A family of bridge functions defining a finite Gaussian path process.

    The full process is a0 * u + sum_k a_k * bridge[k](u) with i.i.d.
    standard-normal coefficients. Every bridge function vanishes at both
    endpoints and is either symmetric (+1) or antisymmetric (-1) under
    u -> 1 - u; the reference profile is always the identity u -> u.
    """

    bridge: tuple[Bridge, ...]
    symmetry: tuple[int, ...]
    family: str = "custom"
    params: tuple[float, ...] = ()

    @property
    def q(self) -> int:
        return len(self.bridge)

    def lambda0(self, u):
        """Reference-path profile; the identity for every implemented family."""
        return np.asarray(u, dtype=float)

    def bridge_values(self, u) -> np.ndarray:
        """Stack bridge-function values: shape (q,) + shape(u)."""
        u = np.asarray(u, dtype=float)
        return np.stack([f(u) for f in self.bridge])

    def reversed_system(self) -> "LambdaSystem":
        """The system with every bridge function reflected about u = 1/2."""
        flipped = tuple(_reflect(f) for f in self.bridge)
        return LambdaSystem(flipped, self.symmetry, self.family + "-reversed", self.params)


def _reflect(f: Bridge) -> Bridge:
    def g(u, _f=f):
        return _f(1.0 - np.asarray(u, dtype=float))

    return g


def make_order3(alpha: float) -> LambdaSystem:
    """Two-bridge system whose free rotation rate ``alpha`` is calibrated to
    give a third-order short-time approximation.

    bridge[0](u) = sqrt(u(1-u)) cos(alpha (u - 1/2))   (symmetric)
    bridge[1](u) = sqrt(u(1-u)) sin(alpha (u - 1/2))   (antisymmetric)
    """

    def lam1(u):
        u = np.asarray(u, dtype=float)
        return _sqrt_env(u) * np.cos(alpha * (u - 0.5))

    def lam2(u):
        u = np.asarray(u, dtype=float)
        return _sqrt_env(u) * np.sin(alpha * (u - 0.5))

    return LambdaSystem((lam1, lam2), (1, -1), "order3", (float(alpha),))


def make_order4(alpha1: float, alpha2: float) -> LambdaSystem:
    """Three-bridge system calibrated to give a fourth-order approximation.

    bridge[0](u) = sqrt(3) u(1-u), and bridge[1], bridge[2] share the
    envelope r(u) = sqrt(u(1-u)(1 - 3u(1-u))) rotated by the odd phase
    alpha1 (u - 1/2) + alpha2 (u - 1/2)^3.
    """

    def lam1(u):
        u = np.asarray(u, dtype=float)
        return math.sqrt(3.0) * u * (1.0 - u)

    def phase(u):
        s = u - 0.5
        return alpha1 * s + alpha2 * s**3

    def renv(u):
        t = u * (1.0 - u)
        return np.sqrt(np.clip(t * (1.0 - 3.0 * t), 0.0, None))

    def lam2(u):
        u = np.asarray(u, dtype=float)
        return renv(u) * np.cos(phase(u))

    def lam3(u):
        u = np.asarray(u, dtype=float)
        return renv(u) * np.sin(phase(u))

    return LambdaSystem(
        (lam1, lam2, lam3), (1, 1, -1), "order4", (float(alpha1), float(alpha2))
    )


def make_custom(
    bridge: Sequence[Bridge],
    symmetry: Sequence[int],
    params: Sequence[float] = (),
    check: bool = True,
    samples: int = 257,
) -> LambdaSystem:
    """Wrap user-supplied bridge functions, verifying the declared symmetry
    tags and the endpoint zeros by sampling (tags are not trusted).
    """
    bridge = tuple(bridge)
    symmetry = tuple(int(s) for s in symmetry)
    if len(bridge) != len(symmetry):
        raise ValueError("one symmetry tag per bridge function is required")
    if any(s not in (-1, 1) for s in symmetry):
        raise ValueError("symmetry tags must be +1 (symmetric) or -1 (antisymmetric)")
    if check:
        u = np.linspace(0.0, 1.0, samples)
        for f, s in zip(bridge, symmetry):
            vals = np.asarray(f(u), dtype=float)
            if abs(vals[0]) > 1e-12 or abs(vals[-1]) > 1e-12:
                raise ValueError("bridge functions must vanish at u = 0 and u = 1")
            if np.max(np.abs(np.asarray(f(1.0 - u)) - s * vals)) > 1e-10:
                raise ValueError("declared symmetry tag does not match the function")
    return LambdaSystem(bridge, symmetry, "custom", tuple(float(p) for p in params))


@dataclass(frozen=True)
class CovarianceKernel:
    """Second-order law of a path process: exact Brownian (min kernel) when
    ``system`` is None, otherwise the finite kernel u v + sum_k bridge_k(u) bridge_k(v).
    """

    system: LambdaSystem | None = None

    @property
    def is_exact_brownian(self) -> bool:
        return self.system is None


def exact_brownian() -> CovarianceKernel:
    return CovarianceKernel(None)


def finite_kernel(system: LambdaSystem) -> CovarianceKernel:
    return CovarianceKernel(system)


def covariance(kernel: CovarianceKernel, u, v):
    """Covariance C(u, v) of the process at times u, v in [0, 1]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0) or np.any(v < 0.0) or np.any(v > 1.0):
        raise ValueError("covariance times must lie in [0, 1]")
    if kernel.is_exact_brownian:
        out = np.minimum(u, v)
    else:
        sysm = kernel.system
        out = u * v
        for f in sysm.bridge:
            out = out + f(u) * f(v)
    if out.ndim == 0:
        return float(out)
    return out


def schauder(level: int, index: int, u):
    """Dyadic tent function value at ``u``.

    The level-1 tent rises from 0 at u=0 to 1/2 at u=1/2 and back to 0 at
    u=1; deeper levels are translated, contracted copies scaled by
    2^{-(level-1)/2}. The function is zero outside its support, so any
    index >= 1 is accepted.
    """
    if level < 1 or index < 1:
        raise ValueError("level and index must be >= 1")
    u = np.asarray(u, dtype=float)
    t = 2.0 ** (level - 1) * u - (index - 1)
    out = 2.0 ** (-(level - 1) / 2.0) * _tent(t)
    if out.ndim == 0:
        return float(out)
    return out


def _tent(t: np.ndarray) -> np.ndarray:
    return np.where((t >= 0.0) & (t <= 0.5), t, np.where((t > 0.5) & (t <= 1.0), 1.0 - t, 0.0))


def dilated_bridge(system: LambdaSystem, levels: int, l: int, j: int, u):
    """Bridge function of ``system`` compressed into the j-th dyadic cell of
    [0, 1] at depth ``levels`` and scaled by 2^{-levels/2}; zero outside.
    """
    if not (1 <= l <= system.q):
        raise ValueError("bridge index out of range")
    if not (1 <= j <= 2**levels):
        raise ValueError("cell index out of range")
    u = np.asarray(u, dtype=float)
    t = 2.0**levels * u - (j - 1)
    inside = (t >= 0.0) & (t <= 1.0)
    vals = np.zeros_like(t)
    tc = np.clip(t, 0.0, 1.0)
    vals = np.where(inside, system.bridge[l - 1](tc), 0.0)
    out = 2.0 ** (-levels / 2.0) * vals
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ComposedPath:
    """Bridge part of a path chained across 2^k dyadic cells.

    ``schauder_coeffs[l-1]`` holds the 2^{l-1} tent coefficients of level l
    (1 <= l <= levels); ``bridge_coeffs`` has shape (q, 2^levels). The
    reference path is not included in the evaluation.
    """

    levels: int
    schauder_coeffs: tuple[np.ndarray, ...]
    bridge_coeffs: np.ndarray
    system: LambdaSystem

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError("levels must be >= 0")
        if len(self.schauder_coeffs) != self.levels:
            raise ValueError("expected one coefficient array per tent level")
        coeffs = []
        for l, arr in enumerate(self.schauder_coeffs, start=1):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (2 ** (l - 1),):
                raise ValueError(f"level {l} expects 2^{l-1} coefficients")
            coeffs.append(arr)
        b = np.asarray(self.bridge_coeffs, dtype=float)
        if b.shape != (self.system.q, 2**self.levels):
            raise ValueError("bridge coefficients must have shape (q, 2^levels)")
        object.__setattr__(self, "schauder_coeffs", tuple(coeffs))
        object.__setattr__(self, "bridge_coeffs", b)


def random_composed_path(system: LambdaSystem, levels: int, rng: np.random.Generator) -> ComposedPath:
    """Draw a composed path with i.i.d. standard-normal coefficients."""
    a = tuple(rng.standard_normal(2 ** (l - 1)) for l in range(1, levels + 1))
    b = rng.standard_normal((system.q, 2**levels))
    return ComposedPath(levels, a, b, system)


def eval_composed(path: ComposedPath, u):
    """Value of the composed bridge at ``u``.

    Cells are left-closed/right-open with u = 1 assigned to the last cell,
    which keeps every index in range and preserves the endpoint zeros.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("u must lie in [0, 1]")
    total = np.zeros_like(u)
    for l in range(1, path.levels + 1):
        ncells = 2 ** (l - 1)
        idx = np.minimum(np.floor(ncells * u).astype(int), ncells - 1)
        t = ncells * u - idx
        total = total + path.schauder_coeffs[l - 1][idx] * 2.0 ** (-(l - 1) / 2.0) * _tent(t)
    ncells = 2**path.levels
    cell = np.minimum(np.floor(ncells * u).astype(int), ncells - 1)
    t = np.clip(ncells * u - cell, 0.0, 1.0)
    scale = 2.0 ** (-path.levels / 2.0)
    for l in range(path.system.q):
        total = total + path.bridge_coeffs[l][cell] * scale * path.system.bridge[l](t)
    if total.ndim == 0:
        return float(total)
    return total


def composed_covariance(system: LambdaSystem, levels: int, u, v):
    """Covariance of the composed bridge at (u, v): the direct functional sum
    over all tent and dilated-bridge terms. Used as an oracle for sampling
    tests of `eval_composed`.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    total = np.zeros(np.broadcast(u, v).shape)
    for l in range(1, levels + 1):
        for j in range(1, 2 ** (l - 1) + 1):
            total = total + schauder(l, j, u) * schauder(l, j, v)
    for l in range(1, system.q + 1):
        for j in range(1, 2**levels + 1):
            total = total + dilated_bridge(system, levels, l, j, u) * dilated_bridge(
                system, levels, l, j, v
            )
    if total.ndim == 0:
        return float(total)
    return total


def variance_identity_error(system: LambdaSystem, samples: int = 1000) -> float:
    """Maximum deviation of u^2 + sum_k bridge_k(u)^2 from u over a uniform
    sample of [0, 1]; zero (to rounding) for valid reweighted systems.
    """
    u = np.linspace(0.0, 1.0, samples)
    total = u * u
    for f in system.bridge:
        total = total + np.asarray(f(u)) ** 2
    return float(np.max(np.abs(total - u)))
