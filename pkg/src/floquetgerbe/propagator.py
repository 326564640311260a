"""Exact and numerical propagators for periodically driven models.

The kicked model's propagator factorizes exactly into free evolution over
each period followed by a finite kick unitary at the period boundary:
U(2*pi) = kick(lam) @ free(2*pi), with the kick attached to the end of the
period it closes. All propagators evolve in the drive phase theta, so
i * omega0 * dU/dtheta = H(theta) U.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FloquetGerbeError, GridError, ScheduleError, UnitarityError
from .models import KickedTwoLevelModel, PeriodicHamiltonianModel
from .numerics import TWO_PI, assert_unitary


@dataclass(frozen=True)
class UnitaryMatrix:
    """A square matrix validated as unitary on construction.

    Products via @ revalidate, so numerical drift in long chains is caught
    at the point it appears instead of corrupting downstream phases.
    """

    entries: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        object.__setattr__(self, "entries", m)
        assert_unitary(m, tol=self.tol, what="UnitaryMatrix")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries.conj().T, tol=self.tol)

    def __matmul__(self, other):
        if isinstance(other, UnitaryMatrix):
            return UnitaryMatrix(self.entries @ other.entries, tol=max(self.tol, other.tol))
        return self.entries @ np.asarray(other)

    def __array__(self, dtype=None):
        return np.asarray(self.entries, dtype=dtype)


def kick_unitary(model: KickedTwoLevelModel, lam: float) -> np.ndarray:
    """Finite unitary produced by one resummed delta kick of strength lam.

    exp(-i*lam*W) with W a projector collapses to 1 + (exp(-i*lam) - 1) W.
    Periodic in lam with period 2*pi.
    """
    if not np.isfinite(lam):
        raise ScheduleError(f"kick strength must be finite, got {lam!r}")
    w = model.kick_projector
    return np.eye(2, dtype=complex) + (np.exp(-1j * lam) - 1.0) * w


def free_evolution(model: KickedTwoLevelModel, theta: float) -> np.ndarray:
    """Propagator of the smooth part over drive phase theta in [0, 2*pi].

    exp(-i * H0 * theta / omega0), diagonal in the bare basis.
    """
    if not (0.0 <= theta <= TWO_PI + 1e-12):
        raise ScheduleError(f"free evolution phase must lie in [0, 2*pi], got {theta}")
    phase = -1j * (model.omega1 / (2.0 * model.omega0)) * theta
    return np.diag([1.0, np.exp(phase)]).astype(complex)


def monodromy(model: KickedTwoLevelModel, lam: float) -> np.ndarray:
    """One-period propagator U(2*pi) = kick(lam) @ free(2*pi)."""
    return kick_unitary(model, lam) @ free_evolution(model, TWO_PI)


def propagate_exact(model: KickedTwoLevelModel, schedule, total_time: float) -> UnitaryMatrix:
    """Exact propagator over [0, total_time] for a kick-strength schedule.

    The schedule lam(t) is sampled only at the kick times t_k = 2*pi*k/omega0;
    between kicks the evolution is free. A trailing partial period, if any,
    contributes a final free factor. Validated unitary on return.
    """
    if total_time < 0:
        raise ScheduleError("total_time must be nonnegative")
    period = TWO_PI / model.omega0
    k_count = int(np.floor(total_time / period + 1e-9))
    free_full = free_evolution(model, TWO_PI)
    u = np.eye(2, dtype=complex)
    for k in range(1, k_count + 1):
        t_k = k * period
        lam = schedule(t_k)
        try:
            lam = float(lam)
        except (TypeError, ValueError) as exc:
            raise ScheduleError(f"schedule returned non-numeric value at t={t_k}") from exc
        if not np.isfinite(lam):
            raise ScheduleError(f"schedule undefined (non-finite) at kick time t={t_k}")
        u = kick_unitary(model, lam) @ (free_full @ u)
    remainder = total_time - k_count * period
    if remainder > 1e-9 * max(period, 1.0):
        u = free_evolution(model, model.omega0 * remainder) @ u
    return UnitaryMatrix(u)


def propagate_ode(
    model: PeriodicHamiltonianModel,
    r,
    theta_span=(0.0, TWO_PI),
    steps: int = 4096,
) -> np.ndarray:
    """Fixed-step RK4 propagator for a smooth periodic Hamiltonian.

    Integrates dU/dtheta = -i H(r, theta) U / omega0 from theta_span[0] to
    theta_span[1]. Deterministic step count keeps runs reproducible; no
    adaptive control, no silent renormalization. Hermiticity of H is checked
    at the first node.
    """
    if steps < 64:
        raise GridError(f"propagate_ode needs at least 64 steps, got {steps}")
    th0, th1 = float(theta_span[0]), float(theta_span[1])
    h_first = model.h_at(r, th0)
    if np.max(np.abs(h_first - h_first.conj().T)) > 1e-12:
        raise FloquetGerbeError("model Hamiltonian is not Hermitian")
    dt = (th1 - th0) / steps
    u = np.eye(model.dim, dtype=complex)
    scale = -1j / model.omega0

    def rhs(theta, mat):
        return scale * (model.h_at(r, theta) @ mat)

    theta = th0
    for _ in range(steps):
        k1 = rhs(theta, u)
        k2 = rhs(theta + 0.5 * dt, u + 0.5 * dt * k1)
        k3 = rhs(theta + 0.5 * dt, u + 0.5 * dt * k2)
        k4 = rhs(theta + dt, u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        theta += dt
    resid = np.max(np.abs(u.conj().T @ u - np.eye(model.dim)))
    if resid > 1e-8:
        raise UnitarityError(f"RK4 propagator drifted from unitarity: {resid:.3e}")
    return u


def smoothed_kick_model(model: KickedTwoLevelModel, width: float) -> PeriodicHamiltonianModel:
    """Kicked model with the delta replaced by a narrow smooth bump.

    The bump is a cos^2 window of full support ``width`` flushed against the
    period end, normalized to unit integral, so the width -> 0 limit
    recovers the resummed kick-at-boundary propagator. Serves as an
    independent arbiter for the kicked closed forms.
    """
    if not (0.0 < width < np.pi):
        raise FloquetGerbeError("bump width must lie in (0, pi)")
    h0 = model.h0
    w_proj = model.kick_projector
    center = TWO_PI - width / 2.0

    def bump(theta):
        x = theta - center
        if abs(x) >= width / 2.0:
            return 0.0
        return (2.0 / width) * np.cos(np.pi * x / width) ** 2

    def h(r, theta):
        (lam,) = np.atleast_1d(r)
        return h0 + model.omega0 * lam * bump(theta) * w_proj

    return PeriodicHamiltonianModel(dim=2, omega0=model.omega0, hamiltonian=h)


def kicked_propagator_samples(model: KickedTwoLevelModel, lam: float, thetas: np.ndarray):
    """Propagator samples U(theta) on a half-open theta grid, plus U(2*pi).

    Within the open period the propagator is pure free evolution; the kick
    enters only through the monodromy returned separately.
    """
    ratio = model.omega1 / (2.0 * model.omega0)
    n = len(thetas)
    u = np.zeros((n, 2, 2), dtype=complex)
    u[:, 0, 0] = 1.0
    u[:, 1, 1] = np.exp(-1j * ratio * np.asarray(thetas))
    return u, monodromy(model, lam)


def ode_propagator_samples(
    model: PeriodicHamiltonianModel, r, thetas: np.ndarray, steps_per_sample: int = 16
):
    """RK4 propagator samples on a half-open theta grid, plus U(2*pi).

    For a smooth periodic Hamiltonian the monodromy is simply the propagator
    continued to the period end; the half-open samples are its restriction.
    """
    n = len(thetas)
    if steps_per_sample < 1:
        raise GridError("steps_per_sample must be positive")
    dt = TWO_PI / n / steps_per_sample
    scale = -1j / model.omega0

    def rhs(theta, mat):
        return scale * (model.h_at(r, theta) @ mat)

    u = np.eye(model.dim, dtype=complex)
    samples = np.empty((n, model.dim, model.dim), dtype=complex)
    theta = 0.0
    for k in range(n):
        samples[k] = u
        for _ in range(steps_per_sample):
            k1 = rhs(theta, u)
            k2 = rhs(theta + 0.5 * dt, u + 0.5 * dt * k1)
            k3 = rhs(theta + 0.5 * dt, u + 0.5 * dt * k2)
            k4 = rhs(theta + dt, u + dt * k3)
            u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            theta += dt
    assert_unitary(u, tol=1e-8, what="ODE monodromy")
    return samples, u
