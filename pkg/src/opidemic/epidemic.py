"""SIR exchange operator, its RK4 integration, splitting, and macro quantities.

Transmission couples compartments through the opinion-weighted incidence
Lambda(w) = int beta_T(w, w*) f_I(y, w*) dy dw*, so protective opinions
(w near 1) suppress both catching and spreading the disease.  Splitting
advances the opinion step first, then the epidemiological exchange.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CflViolationError, ConfigurationError, DomainError
from .grid import MASS_FLOOR, CompartmentField, Moments
from .opinion_fp import FpCoefficients, fp_step


@dataclass(frozen=True)
class EpiParams:
    beta: float
    alpha: float
    gamma: float

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.gamma <= 0.0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.alpha < 0.0:
            raise ConfigurationError(f"alpha must be nonnegative, got {self.alpha}")


@dataclass(frozen=True)
class SirState:
    rho_S: float
    rho_I: float
    rho_R: float


def beta_T(w, w_star, params: EpiParams):
    """Transmission rate beta (1-w)^alpha (1-w*)^alpha."""
    return params.beta * (1.0 - np.asarray(w)) ** params.alpha * (1.0 - np.asarray(w_star)) ** params.alpha


def _incidence(data: np.ndarray, grid, params: EpiParams) -> np.ndarray:
    """Lambda(w) on the opinion nodes for the infectious slice of data."""
    shade = (1.0 - grid.w) ** params.alpha
    s_I = float(np.einsum("i,ij,j->", grid.wx, data[1], shade * grid.ww))
    return params.beta * shade * s_I


def _epi_rhs_data(data: np.ndarray, grid, params: EpiParams) -> np.ndarray:
    lam = _incidence(data, grid, params)[None, :]
    infection = data[0] * lam
    recovery = params.gamma * data[1]
    return np.stack([-infection, infection - recovery, recovery])


def epi_rhs(state: CompartmentField, params: EpiParams) -> np.ndarray:
    """Pointwise exchange rates (E_S, E_I, E_R); they sum to zero."""
    return _epi_rhs_data(state.data, state.grid, params)


def rk4_epi_step(state: CompartmentField, params: EpiParams, dt: float) -> CompartmentField:
    """Classical four-stage update of the per-cell exchange ODEs.

    The incidence integral is re-evaluated from each stage state.
    """
    grid = state.grid
    y = state.data
    k1 = _epi_rhs_data(y, grid, params)
    k2 = _epi_rhs_data(y + 0.5 * dt * k1, grid, params)
    k3 = _epi_rhs_data(y + 0.5 * dt * k2, grid, params)
    k4 = _epi_rhs_data(y + dt * k3, grid, params)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if out.min() < -1e-12:
        raise CflViolationError(
            f"epidemic step dt={dt} produced negative density {out.min():.3e}"
        )
    np.clip(out, 0.0, None, out=out)
    return CompartmentField(grid, out)


def split_step(
    state: CompartmentField,
    coeffs: FpCoefficients,
    params: EpiParams,
    dt: float,
) -> CompartmentField:
    """First-order splitting: opinion step, then epidemic step."""
    return rk4_epi_step(fp_step(state, coeffs, dt), params, dt)


def effective_R(mom: Moments, params: EpiParams) -> float:
    """(beta/gamma) (1 - m_S) (1 - m_I) rho_S; collapses to R0 rho_S at zero means."""
    m_S = mom.m["S"] if mom.rho["S"] > MASS_FLOOR else 0.0
    m_I = mom.m["I"] if mom.rho["I"] > MASS_FLOOR else 0.0
    return (params.beta / params.gamma) * (1.0 - m_S) * (1.0 - m_I) * mom.rho["S"]


def sir_final_size(rho_in: SirState, R0: float, tol: float = 1e-12) -> float:
    """Never-infected fraction: root of log(s/rho_S) + R0 (rho_S + rho_I - s).

    Bisection on (0, rho_S]; with no initial infectives the root is the
    initial susceptible mass itself.
    """
    if R0 <= 0.0 or rho_in.rho_S <= 0.0:
        raise DomainError("final size needs R0 > 0 and rho_S > 0")
    if rho_in.rho_I == 0.0:
        return rho_in.rho_S

    def resid(s: float) -> float:
        return np.log(s / rho_in.rho_S) + R0 * (rho_in.rho_S + rho_in.rho_I - s)

    lo, hi = 1e-300, rho_in.rho_S
    if resid(hi) < 0.0:
        raise DomainError("final-size residual has no sign change in (0, rho_S]")
    while resid(lo) > 0.0:
        lo *= 1e6
        if lo >= hi:
            raise DomainError("final-size residual has no sign change in (0, rho_S]")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        if abs(r) <= tol:
            return mid
        if r < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sir_peak(rho_in: SirState, R0: float) -> float:
    """Largest infectious fraction along the classical SIR trajectory."""
    if R0 <= 1.0 or rho_in.rho_S <= 1.0 / R0:
        return rho_in.rho_I
    return (
        -(np.log(R0) + np.log(rho_in.rho_S) + 1.0) / R0
        + rho_in.rho_S
        + rho_in.rho_I
    )
