"""One-dimensional quadrature rules with polynomial-exactness guarantees.

Everything downstream (time averages along paths, Gaussian coefficient
averages, calibration integrals) is built from the rules in this module.
Rules are frozen after construction and safe to share between workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class RuleKind(enum.Enum):
    GAUSS_LEGENDRE_01 = "gauss-legendre-01"
    GAUSS_HERMITE_PROBABILIST = "gauss-hermite-probabilist"
    COMPOSITE = "composite"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Rule1D:
    """A one-dimensional quadrature rule.

    Parameters
    ----------
    points : array_like
        Strictly increasing abscissas.
    weights : array_like
        Positive weights, one per abscissa.
    kind : RuleKind
        What family the rule belongs to; drives a few validity checks
        elsewhere (e.g. only rules on [0, 1] may be fed to `integrate_01`).
    """

    points: np.ndarray
    weights: np.ndarray
    kind: RuleKind = RuleKind.CUSTOM

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        wts = np.array(self.weights, dtype=float)
        if pts.ndim != 1 or pts.shape != wts.shape:
            raise ValueError("points and weights must be 1-d arrays of equal length")
        if pts.size == 0:
            raise ValueError("a rule needs at least one point")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(wts <= 0):
            raise ValueError("weights must be positive")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    def __len__(self) -> int:
        return self.points.size


def gauss_legendre_01(p: int) -> Rule1D:
    """Gauss-Legendre rule with ``p`` points mapped to the interval [0, 1].

    Exact for polynomials of degree <= 2p - 1. The rule is palindromic:
    points come in mirror pairs u, 1 - u carrying equal weights.
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    x, w = np.polynomial.legendre.leggauss(p)
    return Rule1D(0.5 * (x + 1.0), 0.5 * w, RuleKind.GAUSS_LEGENDRE_01)


def gauss_hermite(p: int) -> Rule1D:
    """Probabilist Gauss-Hermite rule with ``p`` points.

    Integrates against the standard normal density; the weights sum to 1,
    and polynomials of degree <= 2p - 1 are integrated exactly.
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    x, w = np.polynomial.hermite_e.hermegauss(p)
    return Rule1D(x, w / w.sum(), RuleKind.GAUSS_HERMITE_PROBABILIST)


def composite_legendre_01(cells: int = 64, panel: int = 8, sqrt_endpoints: bool = False) -> Rule1D:
    """Composite Gauss-Legendre rule on [0, 1]: ``cells`` uniform cells with a
    ``panel``-point rule in each.

    With ``sqrt_endpoints=True`` the rule is built in the variable
    u = sin^2(pi * theta / 2), which turns sqrt(u(1-u))-type endpoint
    behaviour into an analytic integrand and restores spectral accuracy.
    """
    if cells < 1 or panel < 1:
        raise ValueError("cells and panel must be positive")
    base = gauss_legendre_01(panel)
    edges = np.linspace(0.0, 1.0, cells + 1)
    pts = (edges[:-1, None] + np.diff(edges)[:, None] * base.points[None, :]).ravel()
    wts = (np.diff(edges)[:, None] * base.weights[None, :]).ravel()
    if sqrt_endpoints:
        theta = pts
        pts = np.sin(0.5 * np.pi * theta) ** 2
        wts = wts * (0.5 * np.pi) * np.sin(np.pi * theta)
    return Rule1D(pts, wts, RuleKind.COMPOSITE)


def endpoint_trapezoid() -> Rule1D:
    """The two-point endpoint rule on [0, 1]: points {0, 1}, weights {1/2, 1/2}.

    Exact for polynomials of degree <= 1. This is the time average used by
    the symmetrized kinetic/potential splitting kernel.
    """
    return Rule1D(np.array([0.0, 1.0]), np.array([0.5, 0.5]), RuleKind.CUSTOM)


def integrate_01(rule: Rule1D, f) -> float:
    """Apply ``rule`` to a function on [0, 1]: returns sum_i w_i f(u_i)."""
    if rule.kind not in (RuleKind.GAUSS_LEGENDRE_01, RuleKind.COMPOSITE):
        raise ValueError("integrate_01 expects a rule defined on [0, 1]")
    return float(np.dot(rule.weights, f(rule.points)))


def is_palindromic(rule: Rule1D, tol: float = 1e-14) -> bool:
    """True if the rule on [0, 1] is symmetric under u -> 1 - u.

    Checks that sorted points satisfy u_i + u_{n+1-i} = 1 and that the
    weight sequence is a palindrome.
    """
    p, w = rule.points, rule.weights
    return bool(
        np.all(np.abs(p + p[::-1] - 1.0) <= tol) and np.all(np.abs(w - w[::-1]) <= tol)
    )


def tensor_gauss_hermite(q: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product probabilist Gauss-Hermite grid over ``q`` dimensions.

    Returns (nodes, weights) with nodes of shape (p**q, q) and weights
    summing to 1. Exact for multivariate polynomials of per-variable
    degree <= 2p - 1 against the q-dimensional standard normal.
    """
    if q < 1:
        raise ValueError("q must be positive")
    rule = gauss_hermite(p)
    grids = np.meshgrid(*([rule.points] * q), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([rule.weights] * q), indexing="ij")
    weights = np.ones(p**q)
    for wg in wgrids:
        weights = weights * wg.ravel()
    return nodes, weights
