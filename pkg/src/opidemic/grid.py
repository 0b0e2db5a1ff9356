"""Phase-space discretization, compartment fields, moments, and nonlocal terms.

The phase space is [0,1] x [-1,1] (position on the graphon times opinion),
discretized with uniform nodes x_i = i/N_x and w_j = -1 + 2j/N_w.  All
moments use the composite trapezoid rule on the nodes; the same weights
define the discrete mass that the solvers conserve exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericsError
from .graphon import GraphonLattice

COMPARTMENTS = ("S", "I", "R")
MASS_FLOOR = 1e-12


def trapezoid_weights(n_nodes: int, spacing: float) -> np.ndarray:
    """Composite trapezoid weights: half cells at both ends."""
    w = np.full(n_nodes, spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform tensor grid on position x in [0,1] and opinion w in [-1,1].

    N_x and N_w count cells; the node arrays carry N+1 points including
    both endpoints.
    """

    N_x: int
    N_w: int

    def __post_init__(self):
        if self.N_x < 2:
            raise ConfigurationError(f"N_x must be >= 2, got {self.N_x}")
        if self.N_w < 4:
            raise ConfigurationError(f"N_w must be >= 4, got {self.N_w}")

    @property
    def dx(self) -> float:
        return 1.0 / self.N_x

    @property
    def dw(self) -> float:
        return 2.0 / self.N_w

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N_x + 1)

    @property
    def w(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.N_w + 1)

    @property
    def wx(self) -> np.ndarray:
        return trapezoid_weights(self.N_x + 1, self.dx)

    @property
    def ww(self) -> np.ndarray:
        return trapezoid_weights(self.N_w + 1, self.dw)

    @property
    def quad_weights(self) -> np.ndarray:
        """2-D trapezoid weights over the full phase space."""
        return np.outer(self.wx, self.ww)

    @property
    def quad_weights_interior(self) -> np.ndarray:
        """Trapezoid weights with the w = +-1 node columns dropped."""
        q = self.quad_weights.copy()
        q[:, 0] = 0.0
        q[:, -1] = 0.0
        return q


def integrate_phase(grid: PhaseGrid, fld: np.ndarray) -> float:
    """Trapezoid integral of a field sampled on the phase grid."""
    fld = np.asarray(fld)
    if not np.all(np.isfinite(fld)):
        raise NumericsError("non-finite entries in phase-space field")
    return float(np.einsum("i,ij,j->", grid.wx, fld, grid.ww))


@dataclass
class CompartmentField:
    """The three compartment densities f_S, f_I, f_R sampled on one grid."""

    grid: PhaseGrid
    data: np.ndarray  # shape (3, N_x+1, N_w+1)

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "CompartmentField":
        return cls(grid, np.zeros((3, grid.N_x + 1, grid.N_w + 1)))

    @property
    def f_S(self) -> np.ndarray:
        return self.data[0]

    @property
    def f_I(self) -> np.ndarray:
        return self.data[1]

    @property
    def f_R(self) -> np.ndarray:
        return self.data[2]

    def total(self) -> np.ndarray:
        """Pointwise sum over compartments."""
        return self.data.sum(axis=0)

    def copy(self) -> "CompartmentField":
        return CompartmentField(self.grid, self.data.copy())

    def masses(self) -> np.ndarray:
        return np.array([integrate_phase(self.grid, f) for f in self.data])


@dataclass
class Moments:
    """Scalar and per-position moments of a compartment field."""

    rho: dict
    m: dict
    m_total: float
    rho_ptilde: float
    m_ptilde: float
    rho_B: np.ndarray
    rho_BP: np.ndarray
    m_BP: np.ndarray


def moments(state: CompartmentField, lattice: GraphonLattice) -> Moments:
    """All conserved and tracked moments in one pass.

    Compartment means fall back to 0 when the compartment mass drops
    below MASS_FLOOR (epidemics empty the I class).
    """
    grid = state.grid
    w = grid.w
    rho = {}
    m = {}
    first_total = 0.0
    for J, fld in zip(COMPARTMENTS, state.data):
        r = integrate_phase(grid, fld)
        first = integrate_phase(grid, fld * w[None, :])
        rho[J] = r
        m[J] = first / r if r > MASS_FLOOR else 0.0
        first_total += first
    total_mass = sum(rho.values())
    m_total = first_total / total_mass if total_mass > MASS_FLOOR else 0.0

    f_tot = state.total()
    ptilde = lattice.p_scaled
    rho_pt = float(np.einsum("i,i,ij,j->", grid.wx, ptilde, f_tot, grid.ww))
    m_pt = float(np.einsum("i,i,ij,j->", grid.wx, ptilde, f_tot * w[None, :], grid.ww))

    # Per-x nonlocal densities: integrate the total field against B and B*P.
    marg = f_tot @ grid.ww  # x-marginal of the total density
    first_marg = (f_tot * w[None, :]) @ grid.ww
    rho_B = lattice.B @ (grid.wx * marg)
    rho_BP = lattice.BP @ (grid.wx * marg)
    m_BP = lattice.BP @ (grid.wx * first_marg)
    return Moments(rho, m, m_total, rho_pt, m_pt, rho_B, rho_BP, m_BP)


def functional_H(state: CompartmentField, lattice: GraphonLattice) -> np.ndarray:
    """H(x) = sum_J int B(x,y) f_J(y,w) dy dw, one value per x-node."""
    marg = state.total() @ state.grid.ww
    out = lattice.B @ (state.grid.wx * marg)
    if not np.all(np.isfinite(out)):
        raise NumericsError("H functional evaluated to non-finite values")
    return out


def opinion_kernel_matrix(w_eval: np.ndarray, w_nodes: np.ndarray, G) -> np.ndarray:
    """Matrix (w - w*) G(w, w*) on evaluation points times grid nodes."""
    diff = w_eval[:, None] - w_nodes[None, :]
    return diff * G(w_eval[:, None], w_nodes[None, :])


def functional_K(
    state: CompartmentField,
    lattice: GraphonLattice,
    G=None,
    w_eval: np.ndarray | None = None,
) -> np.ndarray:
    """K(x,w) = sum_J int B(x,y) P(x,y) G(w,w*) (w - w*) f_J(y,w*) dy dw*.

    With G absent (identically one) the affine identity
    K(x,w) = w * rho_BP(x) - m_BP(x) is used as a fast path.
    """
    grid = state.grid
    if w_eval is None:
        w_eval = grid.w
    f_tot = state.total()
    # phi[i, k] = sum_J int B(x_i,y) P(x_i,y) f_J(y, w_k) dy
    phi = lattice.BP @ (grid.wx[:, None] * f_tot)
    if G is None:
        rho_BP = phi @ grid.ww
        m_BP = (phi * grid.w[None, :]) @ grid.ww
        return w_eval[None, :] * rho_BP[:, None] - m_BP[:, None]
    kern = opinion_kernel_matrix(w_eval, grid.w, G)
    return phi @ (kern * grid.ww[None, :]).T


def functional_K_tilde(
    state: CompartmentField,
    lattice: GraphonLattice,
    G=None,
    w_eval: np.ndarray | None = None,
) -> np.ndarray:
    """K~(w) = sum_J int Ptilde(y) G(w,w*) (w - w*) f_J(y,w*) dy dw*.

    Independent of x; with G absent it reduces to
    w * rho_ptilde - m_ptilde.
    """
    grid = state.grid
    if w_eval is None:
        w_eval = grid.w
    f_tot = state.total()
    psi = (grid.wx * lattice.p_scaled) @ f_tot  # psi[k] over opinion nodes
    if G is None:
        rho_pt = float(psi @ grid.ww)
        m_pt = float((psi * grid.w) @ grid.ww)
        return w_eval * rho_pt - m_pt
    kern = opinion_kernel_matrix(w_eval, grid.w, G)
    return kern @ (grid.ww * psi)


def snap_threshold(grid: PhaseGrid, w_hat: float) -> float:
    """Snap an indicator threshold to the nearest opinion node."""
    j = int(round((w_hat + 1.0) / grid.dw))
    j = min(max(j, 0), grid.N_w)
    return float(grid.w[j])


def functional_F(
    state: CompartmentField, lattice: GraphonLattice, w_hat: float, above: bool = True
) -> float:
    """F = int p(x) 1_{w >= w_hat} f(x,w) dx dw over the total density.

    The indicator is applied at nodes with w_j >= w_hat, the threshold
    node included; above=False flips it to the complementary band.
    """
    grid = state.grid
    mask = (grid.w >= w_hat) if above else (grid.w <= w_hat)
    f_tot = state.total()
    return float(
        np.einsum("i,i,ij,j->", grid.wx, lattice.p, f_tot * mask.astype(float)[None, :], grid.ww)
    )
