"""One-period propagator building blocks: kick, free evolution, monodromy,
exact kick-train propagation, and the smooth-bump arbiter."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquetgerbe import (
    FloquetGerbeError,
    KickedTwoLevelModel,
    ScheduleError,
    UnitarityError,
    dipole_drive_model,
    free_evolution,
    kick_unitary,
    monodromy,
    propagate_exact,
    propagate_ode,
    smoothed_kick_model,
)

TWO_PI = 2.0 * np.pi


def closed_form_monodromy(model: KickedTwoLevelModel, lam: float) -> np.ndarray:
    """Independent assembly of the resonant one-period propagator: free
    rotation diag(1, e^{-i pi omega1/omega0}) followed by the rank-one kick
    I + (e^{-i lam} - 1) |w><w| at the period end."""
    w = np.array([1.0, -1.0j]) / np.sqrt(2.0)
    proj = np.outer(w, w.conj())
    kick = np.eye(2, dtype=complex) + (np.exp(-1j * lam) - 1.0) * proj
    free = np.diag([1.0, np.exp(-1j * np.pi * model.omega1 / model.omega0)])
    return kick @ free


def test_monodromy_matches_closed_form_at_resonance():
    model = KickedTwoLevelModel()
    for lam in np.linspace(0.0, 2.0 * TWO_PI, 41):
        assert np.max(np.abs(monodromy(model, lam) - closed_form_monodromy(model, lam))) < 1e-12


def test_resonant_branch_eigenvector_closed_form():
    """At omega0 = omega1 the lower branch of the monodromy has eigenvalue
    exp(-i lam/2) with eigenvector (cos(lam/4), -sin(lam/4))."""
    model = KickedTwoLevelModel()
    for lam in np.linspace(0.1, TWO_PI - 0.1, 17):
        m = monodromy(model, lam)
        v = np.array([np.cos(lam / 4.0), -np.sin(lam / 4.0)], dtype=complex)
        assert np.max(np.abs(m @ v - np.exp(-1j * lam / 2.0) * v)) < 1e-12


def test_kick_is_periodic_in_strength():
    model = KickedTwoLevelModel()
    for lam in (0.3, 2.2, 5.0):
        assert np.max(np.abs(kick_unitary(model, lam) - kick_unitary(model, lam + TWO_PI))) < 1e-12


def test_free_evolution_composes():
    model = KickedTwoLevelModel(omega1=0.613)
    a, b = 1.234, 2.345
    lhs = free_evolution(model, a + b)
    rhs = free_evolution(model, a) @ free_evolution(model, b)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(
    lam=st.floats(min_value=-10.0, max_value=10.0),
    omega1=st.floats(min_value=0.05, max_value=5.0),
)
def test_monodromy_is_unitary(lam, omega1):
    model = KickedTwoLevelModel(omega0=1.0, omega1=omega1)
    m = monodromy(model, lam)
    assert np.max(np.abs(m.conj().T @ m - np.eye(2))) < 1e-12


def test_exact_propagation_of_constant_schedule_is_monodromy_power():
    model = KickedTwoLevelModel(omega1=0.77)
    lam = 1.3
    k = 7
    u = propagate_exact(model, lambda t: lam, k * TWO_PI / model.omega0)
    expected = np.linalg.matrix_power(monodromy(model, lam), k)
    assert np.max(np.abs(u.entries - expected)) < 1e-12


def test_exact_propagation_appends_partial_free_period():
    model = KickedTwoLevelModel()
    lam = 0.9
    extra = 1.2
    u = propagate_exact(model, lambda t: lam, TWO_PI + extra)
    expected = free_evolution(model, extra) @ monodromy(model, lam)
    assert np.max(np.abs(u.entries - expected)) < 1e-12


def test_exact_propagation_rejects_bad_schedules():
    model = KickedTwoLevelModel()
    with pytest.raises(ScheduleError):
        propagate_exact(model, lambda t: float("nan"), TWO_PI)
    with pytest.raises(ScheduleError):
        propagate_exact(model, lambda t: "broken", TWO_PI)
    with pytest.raises(ScheduleError):
        propagate_exact(model, lambda t: 1.0, -1.0)


def test_smoothed_kick_oracle_converges_to_exact_monodromy():
    """Replacing the delta kick by a narrowing cos^2 bump must reproduce the
    resummed kick-at-boundary propagator at first order in the width."""
    model = KickedTwoLevelModel(omega0=1.0, omega1=0.773)
    lam = 1.7
    exact = monodromy(model, lam)
    errors = []
    for denom in (250, 500, 1000):
        width = TWO_PI / denom
        steps = max(4096, int(64 * TWO_PI / width))
        u = propagate_ode(smoothed_kick_model(model, width), np.array([lam]), steps=steps)
        errors.append(np.max(np.abs(u - exact)))
    assert errors[0] < 5e-3
    assert errors[2] < 2e-3
    for coarse, fine in zip(errors, errors[1:]):
        ratio = coarse / fine
        assert 1.8 < ratio < 2.2, f"expected first-order width convergence, got {ratio:.3f}"


def test_dipole_model_propagator_composes_and_is_unitary():
    model = dipole_drive_model(omega0=1.0, omega1=0.6, mu=0.35)
    r = np.array([0.8, 0.3])
    full = propagate_ode(model, r, theta_span=(0.0, TWO_PI), steps=4096)
    first = propagate_ode(model, r, theta_span=(0.0, np.pi), steps=2048)
    second = propagate_ode(model, r, theta_span=(np.pi, TWO_PI), steps=2048)
    assert np.max(np.abs(full - second @ first)) < 1e-9
    assert np.max(np.abs(full.conj().T @ full - np.eye(2))) < 1e-10


def test_ode_propagator_rejects_non_hermitian_model():
    from floquetgerbe.models import PeriodicHamiltonianModel

    bad = PeriodicHamiltonianModel(
        dim=2, omega0=1.0, hamiltonian=lambda r, theta: np.array([[0.0, 1.0], [0.0, 0.0]])
    )
    with pytest.raises(FloquetGerbeError):
        propagate_ode(bad, np.array([0.0]))


def test_smoothed_kick_rejects_degenerate_width():
    model = KickedTwoLevelModel()
    with pytest.raises(FloquetGerbeError):
        smoothed_kick_model(model, 0.0)
    with pytest.raises(FloquetGerbeError):
        smoothed_kick_model(model, 4.0)
