"""Driven-system models.

Basis convention for two-level models: index 0 is the excited state (up),
index 1 the ground state (down). Time enters through the drive phase
theta = omega0 * t, so one drive period is theta in [0, 2*pi). hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FloquetGerbeError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class KickedTwoLevelModel:
    """Two-level system with a static splitting and periodic rank-one kicks.

    H(theta) = H0 + omega0 * lam * W * sum_n delta(theta - 2*pi*n), with
    H0 = (omega1/2) |down><down| and W = |w><w| the projector onto the kick
    vector. The kick strength lam is the model's external parameter; it is
    periodic with period 2*pi (kick_unitary(lam + 2*pi) = kick_unitary(lam)).

    The delta comb is resummed exactly: over one period the propagator is
    free evolution followed by a finite kick unitary at the period boundary.
    """

    omega0: float = 1.0
    omega1: float = 1.0
    kick_vector: tuple = (2.0 ** -0.5 + 0.0j, -1j * 2.0 ** -0.5)
    lambda_period: float = TWO_PI

    def __post_init__(self):
        if self.omega0 <= 0 or self.omega1 <= 0:
            raise FloquetGerbeError("omega0 and omega1 must be positive")
        w = np.asarray(self.kick_vector, dtype=complex)
        if w.shape != (2,):
            raise FloquetGerbeError("kick_vector must have two components")
        if abs(np.vdot(w, w) - 1.0) > 1e-12:
            raise FloquetGerbeError("kick_vector must be normalized")

    @property
    def dim(self) -> int:
        return 2

    @property
    def w_vector(self) -> np.ndarray:
        return np.asarray(self.kick_vector, dtype=complex)

    @property
    def kick_projector(self) -> np.ndarray:
        w = self.w_vector
        return np.outer(w, w.conj())

    @property
    def h0(self) -> np.ndarray:
        return np.diag([0.0, self.omega1 / 2.0]).astype(complex)

    def h_smooth(self, theta=None) -> np.ndarray:
        """Smooth part of the Hamiltonian (everything except the kick comb).

        theta-independent for this model; the argument is accepted so the
        call shape matches generic periodic models.
        """
        return self.h0


@dataclass(frozen=True)
class PeriodicHamiltonianModel:
    """Generic model with a smooth 2*pi-periodic Hamiltonian H(R, theta).

    ``hamiltonian`` maps (R, theta) to a d x d Hermitian matrix, where R is
    an external parameter (scalar or tuple, opaque to this class). Used for
    drives without a resummable delta structure, integrated by a fixed-step
    ODE propagator.
    """

    dim: int
    omega0: float
    hamiltonian: Callable = field(repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise FloquetGerbeError("dim must be at least 2")
        if self.omega0 <= 0:
            raise FloquetGerbeError("omega0 must be positive")

    def h_at(self, r, theta: float) -> np.ndarray:
        h = np.asarray(self.hamiltonian(r, theta), dtype=complex)
        if h.shape != (self.dim, self.dim):
            raise FloquetGerbeError(
                f"hamiltonian returned shape {h.shape}, expected {(self.dim, self.dim)}"
            )
        return h


def dipole_drive_model(omega0: float, omega1: float, mu: float) -> PeriodicHamiltonianModel:
    """Two-level system driven by a classical field through a dipole coupling.

    H(R, theta) = H0 + mu * E * cos(theta + phi) * sigma_x with R = (E, phi)
    the field amplitude and phase offset. With E = 0 the quasienergy states
    reduce to the bare levels.
    """
    h0 = np.diag([0.0, omega1 / 2.0]).astype(complex)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

    def h(r, theta):
        e_amp, phi = r
        return h0 + mu * e_amp * np.cos(theta + phi) * sx

    return PeriodicHamiltonianModel(dim=2, omega0=omega0, hamiltonian=h)
