"""Graphons, interaction functions, degrees, and the propensity to interact.

A graphon is a symmetric kernel B(x, y) on [0,1]^2 weighting how often
agents at positions x and y exchange opinions.  The interaction function
P(x, y) weights how strongly the agent at x is influenced by one at y,
based on their in-degrees.  The propensity p(x) = int B(x,z) P(x,z) dz
combines both, and g(p) = p / (a + p) rescales it into [0, 1).

Singular kernels (the fat-tailed family) are regularized by an additive
shift (x, y) -> (x + cutoff, y + cutoff).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError


class GraphonKind(enum.Enum):
    FAT_TAILED = "fat_tailed"
    SPATIAL_ADJACENCY = "spatial_adjacency"
    CONSTANT = "constant"


@dataclass(frozen=True)
class GraphonSpec:
    """Which graphon/interaction pair is active, plus its parameters.

    xi is the fat-tailed exponent, r the adjacency radius, chi the
    interaction exponent, cutoff the additive singularity shift, and a
    the saturation constant of the propensity rescaling.
    """

    kind: GraphonKind = GraphonKind.CONSTANT
    xi: float = 0.05
    r: float = 0.2
    chi: float = 0.5
    cutoff: float = 1e-10
    a: float = 1.0

    def __post_init__(self):
        if self.kind is GraphonKind.FAT_TAILED and not 0.0 < self.xi < 1.0:
            raise ConfigurationError(f"xi must lie in (0,1), got {self.xi}")
        if self.kind is GraphonKind.SPATIAL_ADJACENCY and not 0.0 < self.r < 0.25:
            raise ConfigurationError(f"r must lie in (0, 0.25), got {self.r}")
        if self.chi <= 0.0:
            raise ConfigurationError(f"chi must be positive, got {self.chi}")
        if self.cutoff < 0.0:
            raise ConfigurationError(f"cutoff must be nonnegative, got {self.cutoff}")
        if self.a <= 0.0:
            raise ConfigurationError(f"a must be positive, got {self.a}")


def graphon_eval(spec: GraphonSpec, x, y):
    """Kernel value B(x, y); accepts scalars or arrays in [0, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.kind is GraphonKind.FAT_TAILED:
        base = (x + spec.cutoff) * (y + spec.cutoff)
        if np.any(base <= 0.0):
            raise DomainError("fat-tailed graphon singular at 0 without cutoff")
        with np.errstate(divide="ignore"):
            out = base ** (-spec.xi)
    elif spec.kind is GraphonKind.SPATIAL_ADJACENCY:
        out = np.where(np.abs(x - y) <= spec.r, 1.0, 0.0)
    else:
        out = np.ones(np.broadcast(x, y).shape)
    if not np.all(np.isfinite(out)):
        raise DomainError("graphon evaluated to a non-finite value")
    return out if out.ndim else float(out)


def in_degree(spec: GraphonSpec, x):
    """d_in(x) = int_0^1 B(x, z) dz, by closed form."""
    x = np.asarray(x, dtype=float)
    if spec.kind is GraphonKind.FAT_TAILED:
        c, xi = spec.cutoff, spec.xi
        scale = ((1.0 + c) ** (1.0 - xi) - c ** (1.0 - xi)) / (1.0 - xi)
        with np.errstate(divide="ignore"):
            out = (x + c) ** (-xi) * scale
    elif spec.kind is GraphonKind.SPATIAL_ADJACENCY:
        out = np.minimum(x + spec.r, 1.0) - np.maximum(x - spec.r, 0.0)
    else:
        out = np.ones_like(x)
    if not np.all(np.isfinite(out)):
        raise DomainError("in-degree integral diverges")
    return out if out.ndim else float(out)


def interaction_eval(spec: GraphonSpec, x, y):
    """P(x, y) = (1 + d_in(x) / d_in(y))^(-chi)."""
    dx = np.asarray(in_degree(spec, x), dtype=float)
    dy = np.asarray(in_degree(spec, y), dtype=float)
    if np.any(dy <= 0.0):
        raise DomainError("interaction function undefined where d_in(y) = 0")
    out = (1.0 + dx / dy) ** (-spec.chi)
    return out if out.ndim else float(out)


def interaction_eval_appendix(spec: GraphonSpec, x: float, y: float) -> float:
    """Nine-branch closed form of P for the spatial adjacency graphon.

    Must agree with interaction_eval; kept as an independent evaluation
    path for cross-checking.
    """
    if spec.kind is not GraphonKind.SPATIAL_ADJACENCY:
        raise DomainError("closed-form P only defined for the adjacency graphon")
    r, chi = spec.r, spec.chi
    if x < r:
        num = x + r
    elif x <= 1.0 - r:
        num = 2.0 * r
    else:
        num = 1.0 - x + r
    if y < r:
        den = y + r
    elif y <= 1.0 - r:
        den = 2.0 * r
    else:
        den = 1.0 - y + r
    return (1.0 + num / den) ** (-chi)


def _quad(func, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(func, lo, hi, limit=200)
    return val


def propensity(spec: GraphonSpec, x: float) -> float:
    """p(x) = int_0^1 B(x, z) P(x, z) dz.

    Uses the closed-form piecewise reduction for the adjacency graphon
    (the interior plateau r * 2^(1-chi) is exact) and adaptive
    quadrature for the fat-tailed one.
    """
    if spec.kind is GraphonKind.CONSTANT:
        return 2.0 ** (-spec.chi)
    if spec.kind is GraphonKind.SPATIAL_ADJACENCY:
        return _propensity_adjacency(spec, float(x))
    return _propensity_fat_tailed(spec, float(x))


def _propensity_adjacency(spec: GraphonSpec, x: float) -> float:
    r, chi = spec.r, spec.chi
    # p(x) = p(1 - x); evaluate on the left half only.
    if x > 0.5:
        x = 1.0 - x
    if x >= 2.0 * r:
        return r * 2.0 ** (1.0 - chi)
    if x >= r:
        plateau = x * 2.0 ** (-chi)
        tail = _quad(lambda y: (1.0 + 2.0 * r / (y + r)) ** (-chi), x - r, r)
        return plateau + tail
    plateau = x * (1.0 + (x + r) / (2.0 * r)) ** (-chi)
    tail = _quad(lambda y: (1.0 + (x + r) / (y + r)) ** (-chi), 0.0, r)
    return plateau + tail


def _propensity_fat_tailed(spec: GraphonSpec, x: float) -> float:
    c, xi, chi = spec.cutoff, spec.xi, spec.chi
    xs = x + c

    def integrand(z: float) -> float:
        zs = z + c
        return (xs * zs) ** (-xi) * (1.0 + (zs / xs) ** xi) ** (-chi)

    val, _ = integrate.quad(integrand, 0.0, 1.0, limit=200, points=[0.0])
    if not math.isfinite(val):
        raise DomainError("propensity integrand non-integrable")
    return val


def propensity_scaled(spec: GraphonSpec, x: float) -> float:
    """g(p(x)) = p / (a + p), an increasing map of p into [0, 1)."""
    p = propensity(spec, x)
    return p / (spec.a + p)


@dataclass
class GraphonLattice:
    """All graphon-derived tables cached on a fixed set of x-nodes.

    Positions are static for an entire run, so B, P, d_in, p, and the
    scaled propensity are computed once and shared read-only afterward.
    """

    spec: GraphonSpec
    x: np.ndarray
    B: np.ndarray = field(init=False)
    P: np.ndarray = field(init=False)
    BP: np.ndarray = field(init=False)
    d_in: np.ndarray = field(init=False)
    p: np.ndarray = field(init=False)
    p_scaled: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        self.x = x
        xi, yj = np.meshgrid(x, x, indexing="ij")
        self.B = np.asarray(graphon_eval(self.spec, xi, yj))
        self.P = np.asarray(interaction_eval(self.spec, xi, yj))
        self.BP = self.B * self.P
        self.d_in = np.asarray(in_degree(self.spec, x))
        self.p = np.array([propensity(self.spec, xv) for xv in x])
        self.p_scaled = self.p / (self.spec.a + self.p)
