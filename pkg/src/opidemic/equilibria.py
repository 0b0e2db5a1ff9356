"""Closed-form steady profiles: beta-shaped opinion states and inverse gamma
popularity states, plus regime classification and the disease-free limit.

The opinion operator relaxes each position toward a beta-type profile
c(x) (1+w)^(e-) (1-w)^(e+).  Nonnegative exponents mean the profile
vanishes at w = +-1 with an interior maximum (consensus); a negative
exponent means divergence at an extreme opinion (polarization).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .epidemic import EpiParams, SirState, sir_final_size
from .errors import DegenerateEquilibriumError, DomainError
from .graphon import GraphonLattice
from .grid import COMPARTMENTS, CompartmentField, Moments, PhaseGrid
from .opinion_fp import ModelVariant, VariantKind


class Regime(enum.Enum):
    CONSENSUS = "consensus"
    POLARIZATION = "polarization"


@dataclass
class BetaEquilibrium:
    """Per-position beta profile parameters for one compartment.

    exponent_minus multiplies log(1+w) (behavior at w = -1) and
    exponent_plus multiplies log(1-w); log_c is the log normalization
    fixing the x-marginal.
    """

    x: np.ndarray
    exponent_minus: np.ndarray
    exponent_plus: np.ndarray
    log_c: np.ndarray
    nu: float


def _beta_log_norm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log of int_{-1}^{1} (1+w)^(a-1) (1-w)^(b-1) dw = 2^(a+b-1) B(a,b)."""
    return (a + b - 1.0) * math.log(2.0) + gammaln(a) + gammaln(b) - gammaln(a + b)


def beta_equilibrium(
    lattice: GraphonLattice,
    nu: float,
    rho_weighted: float,
    m_weighted_inf: float,
    marginal: np.ndarray | None = None,
    rho_B: np.ndarray | None = None,
) -> BetaEquilibrium:
    """Beta profile for one compartment with compromise-to-diffusion ratio nu.

    For the propensity-based operator pass the conserved weighted density
    and mean; for the full graphon operator pass rho_B and the per-x
    weighted quantities instead (rho_weighted and m_weighted_inf may then
    be arrays over x).  marginal(x) prescribes the x-marginal (defaults
    to uniform mass one).
    """
    if nu <= 0.0:
        raise DomainError("nu must be positive")
    x = lattice.x
    rho_w = np.broadcast_to(np.asarray(rho_weighted, dtype=float), x.shape)
    m_w = np.broadcast_to(np.asarray(m_weighted_inf, dtype=float), x.shape)
    if np.any(np.abs(m_w) >= rho_w):
        raise DegenerateEquilibriumError(
            "equilibrium degenerates to a Dirac mass when |m| >= rho"
        )
    if rho_B is None:
        scale = lattice.p_scaled / nu
    else:
        scale = 1.0 / (nu * np.asarray(rho_B, dtype=float))
    a = scale * (rho_w + m_w)  # exponent_minus + 1
    b = scale * (rho_w - m_w)
    if marginal is None:
        marginal = np.ones_like(x)
    with np.errstate(divide="ignore"):
        log_marginal = np.where(marginal > 0.0, np.log(np.maximum(marginal, 1e-300)), -np.inf)
    log_c = log_marginal - _beta_log_norm(a, b)
    return BetaEquilibrium(x, a - 1.0, b - 1.0, log_c, nu)


def sample_beta_equilibrium(eq: BetaEquilibrium, grid: PhaseGrid) -> np.ndarray:
    """Profile values on the grid nodes.

    Divergent (polarized) columns get their w = +-1 node filled by
    geometric extrapolation from the two adjacent interior nodes, so the
    sampled array stays finite.
    """
    w = grid.w
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(1.0 + w > 0.0, np.log1p(w), -np.inf)[None, :]
        logm = np.where(1.0 - w > 0.0, np.log1p(-w), -np.inf)[None, :]
        logf = (
            eq.log_c[:, None]
            + eq.exponent_minus[:, None] * logp
            + eq.exponent_plus[:, None] * logm
        )
    vals = np.exp(logf)
    vals[np.isnan(vals)] = 0.0
    div_lo = eq.exponent_minus < 0.0
    div_hi = eq.exponent_plus < 0.0
    if np.any(div_lo):
        f1, f2 = vals[div_lo, 1], np.maximum(vals[div_lo, 2], 1e-300)
        vals[div_lo, 0] = f1 * f1 / f2
    if np.any(div_hi):
        f1, f2 = vals[div_hi, -2], np.maximum(vals[div_hi, -3], 1e-300)
        vals[div_hi, -1] = f1 * f1 / f2
    return vals


def classify_regime(eq: BetaEquilibrium, x_index: int) -> Regime:
    """Polarization iff an exponent is negative at that position."""
    if min(eq.exponent_minus[x_index], eq.exponent_plus[x_index]) < 0.0:
        return Regime.POLARIZATION
    return Regime.CONSENSUS


def global_sir_equilibrium(
    ic: CompartmentField,
    ic_moments: Moments,
    params: EpiParams,
    variant: ModelVariant,
    lattice: GraphonLattice,
) -> CompartmentField:
    """Long-time state (rho_S_inf B_S, 0, rho_R_inf B_R) for flat incidence.

    Only available for opinion-independent transmission (alpha = 0) and
    the propensity-based operator; the weighted mean is taken from the
    initial data, which is exact when those are independent of x.
    """
    if params.alpha != 0.0:
        raise DomainError("closed-form global equilibrium requires alpha = 0")
    if variant.kind is not VariantKind.SIMPLIFIED_PROPENSITY:
        raise DomainError("closed-form global equilibrium requires the propensity variant")
    grid = ic.grid
    rho_in = SirState(ic_moments.rho["S"], ic_moments.rho["I"], ic_moments.rho["R"])
    rho_S_inf = sir_final_size(rho_in, params.beta / params.gamma)
    total_in = sum(ic_moments.rho.values())
    rho_R_inf = total_in - rho_S_inf

    out = CompartmentField.zeros(grid)
    targets = {"S": rho_S_inf, "I": 0.0, "R": rho_R_inf}
    for idx, J in enumerate(COMPARTMENTS):
        if targets[J] == 0.0:
            continue
        rho_J_in = ic_moments.rho[J]
        marginal = (ic.data[idx] @ grid.ww) / rho_J_in if rho_J_in > 0 else np.ones_like(lattice.x)
        eq = beta_equilibrium(
            lattice,
            variant.sigma2[J] / variant.lambda_strength,
            ic_moments.rho_ptilde,
            ic_moments.m_ptilde,
            marginal=marginal,
        )
        out.data[idx] = targets[J] * sample_beta_equilibrium(eq, grid)
    return out


@dataclass
class InverseGammaEquilibrium:
    """Stationary popularity profile: inverse gamma with a Pareto tail."""

    shape: float
    scale: float

    @property
    def mean(self) -> float:
        return self.scale / (self.shape - 1.0)

    @property
    def mode(self) -> float:
        return self.scale / (self.shape + 1.0)

    @property
    def energy(self) -> float:
        """Second moment; infinite when the diffusion beats the decay."""
        if self.shape <= 2.0:
            return math.inf
        return self.scale**2 / ((self.shape - 1.0) * (self.shape - 2.0))

    def pdf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        pos = v > 0.0
        logpdf = (
            self.shape * math.log(self.scale)
            - gammaln(self.shape)
            - (self.shape + 1.0) * np.log(v[pos])
            - self.scale / v[pos]
        )
        out[pos] = np.exp(logpdf)
        return out

    def sample_on_grid(self, v: np.ndarray, spacing: float, normalize: bool = True) -> np.ndarray:
        """Node samples, optionally rescaled to unit trapezoid mass."""
        h = self.pdf(v)
        if normalize:
            wts = np.full(v.shape, spacing)
            wts[0] *= 0.5
            wts[-1] *= 0.5
            mass = float(wts @ h)
            if mass <= 0.0:
                raise DomainError("sampled inverse gamma profile has zero mass")
            h = h / mass
        return h


def inverse_gamma_equilibrium(F: float, mu: float, zeta2: float, theta: float) -> InverseGammaEquilibrium:
    """Stationary state of the popularity equation at source level F.

    shape = 1 + 2 mu / zeta^2, scale = 2 theta F / zeta^2; the mean is
    theta F / mu and the variance is finite iff zeta^2 < 2 mu.
    """
    if mu <= 0.0 or zeta2 <= 0.0 or theta <= 0.0:
        raise DomainError("mu, zeta2, theta must be positive")
    if F < 0.0:
        raise DomainError("source level F must be nonnegative")
    if F == 0.0:
        raise DegenerateEquilibriumError(
            "zero source: the popularity concentrates into a Dirac mass at v = 0"
        )
    return InverseGammaEquilibrium(1.0 + 2.0 * mu / zeta2, 2.0 * theta * F / zeta2)
