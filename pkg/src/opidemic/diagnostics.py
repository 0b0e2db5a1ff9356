"""Distances, entropies, the negative-order spectral norm, and wave detection."""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

from .errors import DomainError


def _check_same_grid(f: np.ndarray, g: np.ndarray, weights: np.ndarray):
    if f.shape != g.shape or f.shape != weights.shape:
        raise DomainError(f"grid mismatch: {f.shape} vs {g.shape} vs {weights.shape}")


def l1_distance(f: np.ndarray, g: np.ndarray, weights: np.ndarray) -> float:
    """Quadrature-weighted L1 distance; pass endpoint-free weights to
    exclude the divergent boundary columns."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_same_grid(f, g, weights)
    return float(np.sum(weights * np.abs(f - g)))


def relative_entropy(f: np.ndarray, g: np.ndarray, weights: np.ndarray) -> float:
    """int f log(f/g), with 0 log 0 = 0 and +inf where g vanishes under f."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_same_grid(f, g, weights)
    pos = f > 0.0
    if np.any(g[pos] <= 0.0):
        return np.inf
    out = np.zeros_like(f)
    out[pos] = f[pos] * np.log(f[pos] / g[pos])
    return float(np.sum(weights * out))


def hellinger(f: np.ndarray, g: np.ndarray, weights: np.ndarray) -> float:
    """(int (sqrt f - sqrt g)^2)^(1/2)."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_same_grid(f, g, weights)
    if f.min() < 0.0 or g.min() < 0.0:
        raise DomainError("hellinger distance needs nonnegative inputs")
    return float(np.sqrt(np.sum(weights * (np.sqrt(f) - np.sqrt(g)) ** 2)))


def sobolev_neg_norm(
    f: np.ndarray,
    g: np.ndarray,
    spacing: float,
    s: float,
    pad_factor: int = 4,
) -> float:
    """Negative-order spectral norm of f - g on a uniform 1-D grid.

    The difference is zero-extended onto a periodic window pad_factor
    times the physical length and transformed; the norm sums
    |xi|^(-2s) |hat(Delta)(xi)|^2 over nonzero discrete frequencies with
    trapezoidal weights.  Requires equal masses, otherwise the excluded
    zero-frequency bin would carry information.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise DomainError("grid mismatch in spectral norm")
    if not 0.5 < s < 1.0:
        raise DomainError(f"exponent s must lie in (1/2, 1), got {s}")
    wts = np.full(f.shape, spacing)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    if abs(float(wts @ (f - g))) > 1e-8:
        raise DomainError("spectral norm requires equal masses (zero-frequency divergence)")
    delta = f - g
    m = pad_factor * len(delta)
    padded = np.zeros(m)
    padded[: len(delta)] = delta
    spectrum = spacing * np.fft.rfft(padded)
    xi = 2.0 * np.pi * np.fft.rfftfreq(m, d=spacing)
    # Conjugate-symmetric bins count twice; the Nyquist bin gets the
    # trapezoidal half weight.
    weights = np.full(len(xi), 2.0)
    weights[0] = 0.0
    if m % 2 == 0:
        weights[-1] = 1.0
    dxi = xi[1] - xi[0]
    total = np.sum(weights[1:] * xi[1:] ** (-2.0 * s) * np.abs(spectrum[1:]) ** 2) * dxi
    return float(np.sqrt(total))


def detect_waves(times: np.ndarray, series: np.ndarray, prominence: float) -> list[tuple[float, float]]:
    """Local maxima of a time series with topographic prominence at least
    the given threshold, in time order."""
    series = np.asarray(series, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(series) < 3:
        return []
    idx, _ = find_peaks(series, prominence=prominence)
    return [(float(times[i]), float(series[i])) for i in idx]


def default_prominence(series: np.ndarray) -> float:
    """A tenth of the global maximum."""
    return 0.1 * float(np.max(series))
