"""Popularity drift-diffusion on an adaptively truncated v-grid.

Popularity v >= 0 of disease-related products decays at rate mu + zeta^2
(in the advective form), is pumped by theta * F with F the opinion-
weighted source, and diffuses with strength zeta^2 v^2 / 2.  The domain
[0, L] and resolution are chosen from the stationary inverse gamma at
the largest observed source level.

The face exponents int C/D have the exact antiderivative
(2/zeta^2) [(mu+zeta^2) ln v + theta F / v], so stationary profiles are
preserved to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincinv

from .chang_cooper import FaceCoefficients, build_face_coefficients, cc_step
from .errors import ConfigurationError, DomainError, NumericsError
from .grid import trapezoid_weights

# A grid is considered unable to resolve the stationary peak when the
# spacing exceeds this multiple of the peak location.
PEAK_RESOLUTION_FACTOR = 4.0


@dataclass(frozen=True)
class PopularityParams:
    mu: float
    theta: float
    zeta2: float
    tau_p: float = 1.0

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ConfigurationError(f"mu must be positive, got {self.mu}")
        if self.theta <= 0.0:
            raise ConfigurationError(f"theta must be positive, got {self.theta}")
        if self.zeta2 <= 0.0:
            raise ConfigurationError(f"zeta2 must be positive, got {self.zeta2}")
        if self.tau_p <= 0.0:
            raise ConfigurationError(f"tau_p must be positive, got {self.tau_p}")


@dataclass(frozen=True)
class GridPolicy:
    """How to truncate and resolve the popularity domain."""

    eps_tail: float = 1e-12
    L_min_peaks: float = 8.0
    N_min: int = 101
    N_max: int = 801
    dv_target: float | None = None  # None: a tenth of the stationary peak

    def __post_init__(self):
        if not 0.0 < self.eps_tail < 1e-3:
            raise ConfigurationError("eps_tail must lie in (0, 1e-3)")
        if self.N_min > self.N_max or self.N_min < 2:
            raise ConfigurationError("need 2 <= N_min <= N_max")
        if self.L_min_peaks <= 0.0:
            raise ConfigurationError("L_min_peaks must be positive")
        if self.dv_target is not None and self.dv_target <= 0.0:
            raise ConfigurationError("dv_target must be positive")


def adapt_grid(policy: GridPolicy, mu: float, zeta2: float, theta: float, F_max: float) -> tuple[int, float]:
    """Pick (N_v, L) so the stationary tail mass beyond L stays below
    eps_tail while the peak region remains covered.

    Raises when the admissible cell counts cannot resolve the peak.
    """
    if F_max <= 0.0:
        raise DomainError("grid adaptation needs a positive source bound")
    shape = 1.0 + 2.0 * mu / zeta2
    scale = 2.0 * theta * F_max / zeta2
    v_peak = theta * F_max / (zeta2 + mu)
    # Tail mass beyond L equals the regularized lower incomplete gamma
    # at scale / L; invert it for the truncation point.
    L_tail = scale / float(gammaincinv(shape, policy.eps_tail))
    L = max(L_tail, policy.L_min_peaks * v_peak)
    dv_target = policy.dv_target if policy.dv_target is not None else v_peak / 10.0
    N_v = int(min(max(math.ceil(L / dv_target), policy.N_min), policy.N_max))
    if L / N_v > PEAK_RESOLUTION_FACTOR * v_peak:
        raise ConfigurationError(
            f"tail criterion forces L={L:.3g} but N_max={policy.N_max} cells "
            f"cannot resolve the stationary peak at {v_peak:.3g}"
        )
    return N_v, L


@dataclass
class PopularityField:
    """Distribution h on the truncated popularity grid."""

    L: float
    N_v: int
    h: np.ndarray
    params: PopularityParams

    @property
    def dv(self) -> float:
        return self.L / self.N_v

    @property
    def v(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N_v + 1)

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.N_v + 1, self.dv)

    def mass(self) -> float:
        return float(self.weights @ self.h)

    def copy(self) -> "PopularityField":
        return PopularityField(self.L, self.N_v, self.h.copy(), self.params)


def pop_drift(v, F: float, params: PopularityParams):
    """Structural drift -(mu + zeta^2) v + theta F (before the tau_p scaling)."""
    return -(params.mu + params.zeta2) * np.asarray(v, dtype=float) + params.theta * F


def pop_face_coefficients(field: PopularityField, F: float) -> FaceCoefficients:
    """Face exponents from the exact antiderivative of drift/diffusion."""
    if F < 0.0:
        raise DomainError("source level F must be nonnegative")
    p = field.params
    v = field.v
    dv = field.dv
    pref = 2.0 / p.zeta2
    with np.errstate(divide="ignore", invalid="ignore"):
        log_v = np.where(v > 0.0, np.log(np.maximum(v, 1e-300)), -np.inf)
        inv_v = np.where(v > 0.0, 1.0 / np.maximum(v, 1e-300), np.inf)
        anti = pref * ((p.mu + p.zeta2) * log_v + p.theta * F * inv_v)
    lam = anti[1:] - anti[:-1]
    # First cell: the antiderivative diverges at v = 0; the sign of the
    # integrand there decides the upwind limit (inflow for F > 0).
    lam[0] = -np.inf if F > 0.0 else np.inf
    diff_face = p.zeta2 * (v[:-1] ** 2 + v[:-1] * v[1:] + v[1:] ** 2) / 6.0 / p.tau_p
    return build_face_coefficients(lam, diff_face, dv)


def pop_cfl_dt(coeffs: FaceCoefficients, dv: float, safety: float, dt_max: float = np.inf) -> float:
    scale = max(coeffs.cfl_scale, 1e-30)
    return float(min(dt_max, safety * dv / (2.0 * scale)))


def pop_step(field: PopularityField, F: float, dt_p: float,
             coeffs: FaceCoefficients | None = None) -> PopularityField:
    """One semi-implicit step at frozen source level F.

    Coefficients may be passed in to reuse them while F is constant.
    """
    if coeffs is None:
        coeffs = pop_face_coefficients(field, F)
    before = field.mass()
    out = cc_step(field.h, coeffs, dt_p, field.weights)
    new = PopularityField(field.L, field.N_v, out, field.params)
    if abs(new.mass() - before) > 1e-12 * max(abs(before), 1e-300):
        raise NumericsError("popularity mass drift beyond tolerance")
    return new


def interpolate_F(times: np.ndarray, values: np.ndarray, t: float) -> float:
    """Piecewise-constant source level: F(t) = F(t_n) on [t_n, t_{n+1})."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        raise DomainError("empty source series")
    if t < times[0]:
        raise DomainError(f"time {t} precedes the first source stamp {times[0]}")
    idx = int(np.searchsorted(times, t, side="right")) - 1
    return float(values[idx])


def pop_moments(field: PopularityField) -> tuple[float, float]:
    """Trapezoid first and second moments (mean popularity and energy)."""
    w = field.weights
    v = field.v
    return float(w @ (v * field.h)), float(w @ (v**2 * field.h))


@dataclass
class PopularityRun:
    times: np.ndarray
    m_p: np.ndarray
    e_p: np.ndarray
    snapshots: dict = field(default_factory=dict)
    final: PopularityField | None = None


def run_popularity(
    field: PopularityField,
    F_times: np.ndarray,
    F_values: np.ndarray,
    T: float,
    safety: float = 0.95,
    dt_max: float = np.inf,
    output_interval: float | None = None,
    snapshot_times: tuple = (),
) -> PopularityRun:
    """Advance h to time T against a recorded source series.

    The popularity clock subdivides the source stamps independently;
    steps never cross a stamp, so replaying a stored series reproduces
    an interleaved run exactly.
    """
    F_times = np.asarray(F_times, dtype=float)
    F_values = np.asarray(F_values, dtype=float)
    t = float(F_times[0])
    out_t = [t]
    m0, e0 = pop_moments(field)
    out_m, out_e = [m0], [e0]
    snaps = {}
    pending = sorted(snapshot_times)
    if pending and pending[0] <= t:
        snaps[pending.pop(0)] = field.h.copy()
    record_at = t + (output_interval or np.inf)
    current_F = None
    coeffs = None
    while t < T - 1e-12:
        F = interpolate_F(F_times, F_values, t)
        if F != current_F:
            coeffs = pop_face_coefficients(field, F)
            current_F = F
        dt = pop_cfl_dt(coeffs, field.dv, safety, dt_max)
        nxt = int(np.searchsorted(F_times, t, side="right"))
        if nxt < len(F_times):
            dt = min(dt, F_times[nxt] - t)
        dt = min(dt, T - t)
        field = pop_step(field, F, dt, coeffs)
        t += dt
        if t >= record_at - 1e-12 or t >= T - 1e-12:
            m, e = pop_moments(field)
            out_t.append(t)
            out_m.append(m)
            out_e.append(e)
            while record_at <= t + 1e-12:
                record_at += output_interval or np.inf
        while pending and t >= pending[0] - 1e-12:
            snaps[pending.pop(0)] = field.h.copy()
    return PopularityRun(np.array(out_t), np.array(out_m), np.array(out_e), snaps, field)
