"""Floquet decomposition of one-period propagators.

A periodic propagator factorizes as U(theta) = Z(theta) exp(i M theta) with
Z 2*pi-periodic, Z(0) = 1, and M Hermitian. Writing M |mu_j> =
-(chi_j / omega0) |mu_j> defines the quasienergies chi_j, fixed to a
principal window of width omega0. Quasienergy states

    |a(theta)> = exp(i n theta) Z(theta) |mu_j> = exp(i chi_a theta/omega0) U(theta) |mu_j>

carry chi_a = chi_j + n * omega0, with the integer n labelling the Floquet
block. The second equality is used throughout for evaluation: it needs only
propagator samples and a monodromy eigenvector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, GridError
from .numerics import (
    TWO_PI,
    circular_gap,
    fd_derivative,
    fix_phase_largest_component,
    theta_average,
    theta_integral,
    unitary_eigensystem,
)


@dataclass(frozen=True)
class FloquetDecomposition:
    """Result of factorizing a sampled propagator.

    Attributes
    ----------
    theta_grid : ndarray
        Half-open uniform grid on [0, 2*pi).
    z_samples : ndarray, shape (n_theta, d, d)
        Periodic factor Z(theta) at the grid nodes; z_samples[0] = 1.
    m_matrix : ndarray, shape (d, d)
        Hermitian generator M.
    chi_tilde : ndarray, shape (d,)
        Principal-window quasienergies, ascending.
    mu_vectors : ndarray, shape (d, d)
        Orthonormal eigenvector columns of M, one per branch, phases fixed
        so the largest-modulus component is real positive.
    omega0 : float
        Drive frequency.
    window_offset : float
        Lower edge of the principal eigenphase window, in units of drive
        phase (chi_tilde lies in [offset, offset + 2*pi) * omega0 / 2*pi).
    """

    theta_grid: np.ndarray
    z_samples: np.ndarray
    m_matrix: np.ndarray
    chi_tilde: np.ndarray
    mu_vectors: np.ndarray
    omega0: float
    window_offset: float = 0.0

    @property
    def dim(self) -> int:
        return self.m_matrix.shape[0]

    def monodromy(self) -> np.ndarray:
        """exp(i M 2*pi), reconstructed from the stored eigensystem."""
        phases = np.exp(-2j * np.pi * (self.chi_tilde / self.omega0))
        return (self.mu_vectors * phases) @ self.mu_vectors.conj().T


@dataclass(frozen=True)
class QuasienergyState:
    """One quasienergy state sampled over a drive period."""

    branch: int
    block: int
    chi: float
    samples: np.ndarray
    theta_grid: np.ndarray
    omega0: float


def floquet_decompose(
    u_samples: np.ndarray,
    monodromy: np.ndarray,
    omega0: float,
    theta_grid: np.ndarray | None = None,
    degeneracy_tol: float = 1e-8,
    window_offset: float = 0.0,
) -> FloquetDecomposition:
    """Factor propagator samples into periodic part and Hermitian generator.

    Parameters
    ----------
    u_samples : ndarray, shape (n_theta, d, d)
        Propagator at the half-open grid nodes, with u_samples[0] = 1.
    monodromy : ndarray
        One-period propagator U(2*pi). Passed separately because the grid
        excludes the period end, where a kick may act.
    omega0 : float
        Drive frequency.
    degeneracy_tol : float
        Minimum circular eigenphase gap; below it the branch labelling is
        ill-defined and a DegenerateSpectrumError is raised.
    window_offset : float
        Shifts the principal eigenphase window; a pure relabelling that
        moves some chi_tilde by omega0 and the matching states by
        exp(+/- i theta), leaving the reconstructed propagator unchanged.
    """
    u = np.asarray(u_samples, dtype=complex)
    if u.ndim != 3 or u.shape[1] != u.shape[2]:
        raise GridError(f"u_samples must be (n, d, d), got {u.shape}")
    if np.max(np.abs(u[0] - np.eye(u.shape[1]))) > 1e-10:
        raise GridError("u_samples[0] must be the identity")
    n, d, _ = u.shape
    thetas = np.linspace(0.0, TWO_PI, n, endpoint=False) if theta_grid is None else np.asarray(theta_grid)

    zeta, vecs = unitary_eigensystem(np.asarray(monodromy, dtype=complex))
    gap = circular_gap(zeta)
    if gap < degeneracy_tol:
        raise DegenerateSpectrumError(
            f"monodromy eigenphases nearly degenerate: circular gap {gap:.3e}"
        )
    # exp(i M 2*pi) has eigenvalue exp(i zeta) = exp(-2*pi*i chi/omega0):
    # map each eigenphase to the principal quasienergy window.
    mu_phase = np.mod(-zeta - window_offset, TWO_PI) + window_offset
    chi = mu_phase * omega0 / TWO_PI
    order = np.argsort(chi)
    chi = chi[order]
    vecs = vecs[:, order]
    vecs = np.column_stack([fix_phase_largest_component(vecs[:, j]) for j in range(d)])

    m_eigs = -mu_phase[order] / TWO_PI
    m_matrix = (vecs * m_eigs) @ vecs.conj().T

    # Z(theta_k) = U(theta_k) exp(-i M theta_k), via the eigensystem.
    phase_table = np.exp(-1j * np.outer(thetas, m_eigs))
    exp_neg = np.einsum("ij,kj,lj->kil", vecs, phase_table, vecs.conj())
    z = u @ exp_neg
    z[0] = np.eye(d)

    return FloquetDecomposition(
        theta_grid=thetas,
        z_samples=z,
        m_matrix=m_matrix,
        chi_tilde=chi,
        mu_vectors=vecs,
        omega0=omega0,
        window_offset=window_offset,
    )


def reconstruct_propagator(decomp: FloquetDecomposition) -> np.ndarray:
    """Z(theta) exp(i M theta) at every grid node, for invariant checks."""
    m_eigs = -(decomp.chi_tilde / decomp.omega0)
    phase_table = np.exp(1j * np.outer(decomp.theta_grid, m_eigs))
    exp_pos = np.einsum(
        "ij,kj,lj->kil", decomp.mu_vectors, phase_table, decomp.mu_vectors.conj()
    )
    return decomp.z_samples @ exp_pos


def quasienergy_state(decomp: FloquetDecomposition, branch: int, block: int = 0) -> QuasienergyState:
    """Quasienergy state exp(i n theta) Z(theta) |mu_branch> on the grid.

    Block n enters only through the scalar factor exp(i n theta), so states
    of the same branch form an exact ladder in n.
    """
    if not (0 <= branch < decomp.dim):
        raise GridError(f"branch {branch} out of range for dim {decomp.dim}")
    base = decomp.z_samples @ decomp.mu_vectors[:, branch]
    samples = np.exp(1j * block * decomp.theta_grid)[:, None] * base
    chi = float(decomp.chi_tilde[branch] + block * decomp.omega0)
    return QuasienergyState(
        branch=branch,
        block=block,
        chi=chi,
        samples=samples,
        theta_grid=decomp.theta_grid,
        omega0=decomp.omega0,
    )


def moore_stedman_phase_split(
    decomp: FloquetDecomposition, branch: int, h_smooth_samples: np.ndarray
):
    """Split the one-period phase of a Floquet branch into dynamical and
    geometric factors.

    dynamical = exp(-(i/omega0) * integral <z|H|z> dtheta)
    geometric = exp(- integral <z|d_theta z> dtheta)

    with |z(theta)> = Z(theta)|mu>. Their product equals the branch's
    one-period eigenphase exp(-2*pi*i chi_tilde/omega0). The geometric
    factor is the open-path holonomy of the periodic part alone and is
    invariant under time reparametrizations of the drive.

    Parameters
    ----------
    h_smooth_samples : ndarray, (n_theta, d, d) or (d, d)
        Smooth part of the Hamiltonian on the theta grid. Kick combs at the
        period boundary act outside the open grid and are excluded; their
        effect enters through the monodromy's eigenphase instead.
    """
    v = decomp.z_samples @ decomp.mu_vectors[:, branch]
    h = np.asarray(h_smooth_samples, dtype=complex)
    if h.ndim == 2:
        hv = v @ h.T
    else:
        hv = np.einsum("kij,kj->ki", h, v)
    energy = np.einsum("ki,ki->k", v.conj(), hv)
    dyn = np.exp(-1j * theta_integral(energy, mode="auto") / decomp.omega0)

    dtheta = decomp.theta_grid[1] - decomp.theta_grid[0]
    dv = fd_derivative(v, dtheta, axis=0, order=4)
    conn = np.einsum("ki,ki->k", v.conj(), dv)
    geo = np.exp(-theta_integral(conn, mode="auto"))
    return complex(dyn), complex(geo)


def expectation_residual(state: QuasienergyState, h_smooth_samples: np.ndarray) -> float:
    """Residual of the quasienergy sum rule for a sampled state.

    chi = <a|H|a>_avg - i*omega0*<a|d_theta a>_avg over one period. Sensitive
    to phase corruption of the periodic part at the 1e-3 level, so it doubles
    as a health check on section construction.
    """
    v = state.samples
    h = np.asarray(h_smooth_samples, dtype=complex)
    if h.ndim == 2:
        hv = v @ h.T
    else:
        hv = np.einsum("kij,kj->ki", h, v)
    energy_avg = theta_average(np.einsum("ki,ki->k", v.conj(), hv), mode="auto")
    dtheta = state.theta_grid[1] - state.theta_grid[0]
    dv = fd_derivative(v, dtheta, axis=0, order=4)
    conn_avg = theta_average(np.einsum("ki,ki->k", v.conj(), dv), mode="auto")
    return float(abs(state.chi - (energy_avg - 1j * state.omega0 * conn_avg)))


def floquet_hamiltonian_residual(
    state: QuasienergyState, h_smooth_samples: np.ndarray, edge_trim: int = 4
) -> float:
    """Max interior norm of (H - i*omega0*d_theta - chi)|a(theta)>.

    The theta derivative uses one-sided stencils near the grid edges, so a
    few edge samples are trimmed before taking the max.
    """
    v = state.samples
    h = np.asarray(h_smooth_samples, dtype=complex)
    if h.ndim == 2:
        hv = v @ h.T
    else:
        hv = np.einsum("kij,kj->ki", h, v)
    dtheta = state.theta_grid[1] - state.theta_grid[0]
    dv = fd_derivative(v, dtheta, axis=0, order=4)
    resid = hv - 1j * state.omega0 * dv - state.chi * v
    core = resid[edge_trim:-edge_trim] if edge_trim > 0 else resid
    return float(np.max(np.linalg.norm(core, axis=1)))
