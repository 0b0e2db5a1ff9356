"""Shared structure-preserving drift-diffusion machinery.

Both the opinion and the popularity solvers advance equations of the
form  tau df/dt = d/ds [ C(s) f + D(s) df/ds ]  on a uniform node grid
with zero flux through both ends.  Nodes own dual cells (half cells at
the ends), so the conserved discrete mass is exactly the trapezoid sum.

Face exponents lambda = int_cell C/D determine the weighted averages;
the face drift is reconstructed as D_face * lambda / ds, which makes the
discrete steady state match exp(-int C/D) between adjacent nodes.  The
implicit update matrix is an M-matrix for any time step, so solutions
stay nonnegative and per-row mass is conserved to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import CflViolationError, NumericsError

# Face exponents are clipped here; a face hitting the cap represents a
# degenerate-diffusion boundary whose node ratio is indistinguishable
# from 0 at this magnitude.
LAMBDA_CAP = 60.0

# Normalized closed Newton-Cotes weights per accuracy order.
_NEWTON_COTES = {
    2: np.array([0.5, 0.5]),
    4: np.array([1.0, 4.0, 1.0]) / 6.0,
    6: np.array([7.0, 32.0, 12.0, 32.0, 7.0]) / 90.0,
}


def newton_cotes_weights(order: int) -> np.ndarray:
    try:
        return _NEWTON_COTES[order]
    except KeyError:
        raise NumericsError(f"unsupported quadrature order {order}") from None


def face_quadrature_points(nodes: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature abscissae inside every cell [s_j, s_{j+1}].

    Returns (points, weights) with points of shape (n_faces, n_sub) and
    the normalized weights of the rule.
    """
    wts = newton_cotes_weights(order)
    frac = np.linspace(0.0, 1.0, len(wts))
    lo = nodes[:-1]
    hi = nodes[1:]
    pts = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    return pts, wts


def cc_weights(lam):
    """Exponential-fitting weight delta(lambda) = 1/lambda + 1/(1 - e^lambda).

    Evaluated by series for small |lambda| (delta -> 1/2) and by the
    upwind limits 0/1 for large |lambda|.
    """
    lam = np.asarray(lam, dtype=float)
    out = np.empty_like(lam)
    small = np.abs(lam) < 1e-6
    large = np.abs(lam) > 500.0
    mid = ~(small | large)
    out[small] = 0.5 - lam[small] / 12.0
    out[large] = np.where(lam[large] > 0.0, 0.0, 1.0)
    lm = lam[mid]
    out[mid] = 1.0 / lm + 1.0 / (1.0 - np.exp(lm))
    return out if out.ndim else float(out)


def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas elimination for (batches of) tridiagonal systems.

    All arguments share the shape (..., n); lower[..., 0] and
    upper[..., -1] are ignored.  Raises on zero pivots.  Single systems
    go through the LAPACK banded solver, batches through a vectorized
    sweep over the band index.
    """
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = diag.shape[-1]
    n_batch = int(np.prod(diag.shape[:-1], dtype=int))
    if n_batch * 8 < n:
        # few long systems: the LAPACK banded solver beats a python sweep
        if np.any(diag == 0.0):
            raise NumericsError("zero pivot in tridiagonal solve")
        shape = diag.shape
        flat = (
            lower.reshape(n_batch, n),
            diag.reshape(n_batch, n),
            upper.reshape(n_batch, n),
            rhs.reshape(n_batch, n),
        )
        out = np.empty((n_batch, n))
        band = np.zeros((3, n))
        for b in range(n_batch):
            lo, dg, up, rh = (arr[b] for arr in flat)
            band[0, 1:] = up[:-1]
            band[1, :] = dg
            band[2, :-1] = lo[1:]
            out[b] = solve_banded((1, 1), band, rh)
        return out.reshape(shape)
    cp = np.empty_like(diag)
    dp = np.empty_like(rhs)
    piv = diag[..., 0]
    if np.any(piv == 0.0):
        raise NumericsError("zero pivot in tridiagonal solve")
    cp[..., 0] = upper[..., 0] / piv
    dp[..., 0] = rhs[..., 0] / piv
    for k in range(1, n):
        piv = diag[..., k] - lower[..., k] * cp[..., k - 1]
        if np.any(piv == 0.0):
            raise NumericsError("zero pivot in tridiagonal solve")
        cp[..., k] = upper[..., k] / piv
        dp[..., k] = (rhs[..., k] - lower[..., k] * dp[..., k - 1]) / piv
    out = np.empty_like(rhs)
    out[..., -1] = dp[..., -1]
    for k in range(n - 2, -1, -1):
        out[..., k] = dp[..., k] - cp[..., k] * out[..., k + 1]
    return out


@dataclass
class FaceCoefficients:
    """Per-face data of one drift-diffusion operator, frozen at t^n.

    Shapes are (..., n_faces) with one face between each node pair.
    drift = diff * lam / ds is the reconstructed advective face value;
    cfl_scale is max |drift| over faces that did not hit the exponent
    clip (clipped faces sit on degenerate-diffusion boundaries and carry
    exponentially small flux).
    """

    lam: np.ndarray
    delta: np.ndarray
    drift: np.ndarray
    diff: np.ndarray
    ds: float
    cfl_scale: float


def build_face_coefficients(lam_raw: np.ndarray, diff_face: np.ndarray, ds: float) -> FaceCoefficients:
    lam = np.clip(np.nan_to_num(lam_raw, nan=0.0, posinf=np.inf, neginf=-np.inf),
                  -LAMBDA_CAP, LAMBDA_CAP)
    delta = cc_weights(lam)
    drift = diff_face * lam / ds
    clipped = np.abs(lam) >= LAMBDA_CAP
    free = np.where(clipped, 0.0, np.abs(drift))
    cfl_scale = float(free.max()) if free.size else 0.0
    return FaceCoefficients(lam, delta, drift, diff_face, ds, cfl_scale)


def cc_step(f: np.ndarray, coeffs: FaceCoefficients, dt: float, cell: np.ndarray) -> np.ndarray:
    """One semi-implicit step of the flux form on dual cells.

    f has shape (..., n_nodes); cell holds the dual-cell widths (the
    trapezoid weights).  Zero flux is imposed through both ends.
    """
    ds = coeffs.ds
    a = coeffs.drift * (1.0 - coeffs.delta) + coeffs.diff / ds
    b = coeffs.drift * coeffs.delta - coeffs.diff / ds
    n = f.shape[-1]
    shape = np.broadcast_shapes(f.shape, a.shape[:-1] + (n,))
    lower = np.zeros(shape)
    diag = np.zeros(shape)
    upper = np.zeros(shape)
    diag[...] = cell
    # interior faces j+1/2 couple nodes j and j+1
    lower[..., 1:] = dt * b
    diag[..., :-1] -= dt * b
    diag[..., 1:] += dt * a
    upper[..., :-1] = -dt * a
    rhs = np.ascontiguousarray(np.broadcast_to(cell * f, shape))
    out = solve_tridiagonal(lower, diag, upper, rhs)
    if not np.all(np.isfinite(out)):
        raise NumericsError("drift-diffusion step produced non-finite values")
    if out.min() < -1e-14:
        raise CflViolationError(f"negative density {out.min():.3e} after step")
    np.clip(out, 0.0, None, out=out)
    return out
