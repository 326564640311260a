"""Loop schedules, surface holonomy assembly, and the adiabatic prediction
checked against brute-force propagation of the driven model."""

import numpy as np
import pytest

from floquetgerbe import (
    build_canonical_sections,
    compute_all_transitions,
    propagate_exact,
)
from floquetgerbe.errors import GridError, ScheduleError
from floquetgerbe.holonomy import (
    adiabatic_prediction,
    dynamical_phase,
    kicked_linear_loop,
    make_loop_schedule,
    surface_holonomy,
    verify_against_exact,
    worked_loop_reference_phase,
)

TWO_PI = 2.0 * np.pi
HANDOFFS = (0.5 * np.pi, 2.5 * np.pi, 3.5 * np.pi)


def _linear_factory(atlas):
    return lambda k: kicked_linear_loop(atlas, k)


# ---------------------------------------------------------------------------
# the worked loop against the exact propagator
# ---------------------------------------------------------------------------


def test_even_kick_loops_close_exactly(model, atlas, sections):
    """With an even number of drive periods the kick positions pair up
    across the two halves of the parameter circle and the exact evolution
    returns the spin-up state with no deviation at all."""
    psi0 = sections[1].state_at(0.0, np.array([0.0]))[0]
    assert np.allclose(psi0, [1.0, 0.0], atol=1e-12)
    for k in (8, 10, 12, 16):
        schedule = kicked_linear_loop(atlas, k)
        exact = (
            propagate_exact(model, schedule.lambda_of_t, schedule.total_time).entries
            @ psi0
        )
        assert np.linalg.norm(exact - np.array([1.0, 0.0])) < 1e-12


def test_prediction_matches_exact_propagation(
    model, atlas, sections, transitions, tables_cache
):
    row = verify_against_exact(
        model,
        sections,
        transitions,
        atlas,
        _linear_factory(atlas),
        [16],
        tables_cache=tables_cache,
    ).rows[0]
    assert abs(row.fidelity_deficit) < 1e-12
    assert row.phase_error < 1e-8


def test_holonomy_factor_closed_form(atlas, sections, transitions, tables_cache):
    """The assembled holonomy factor for the linear loop is exp(i omega0 T/4)
    and the dynamical phase is -omega0 T / 4; their product alternates sign
    with the parity of half the kick count."""
    for k in (10, 16):
        schedule = kicked_linear_loop(atlas, k)
        pred = adiabatic_prediction(
            sections, transitions, atlas, schedule, tables_cache=tables_cache
        )
        total_time = schedule.total_time
        assert abs(pred.holonomy.gamma - np.exp(1j * total_time / 4.0)) < 1e-6
        assert abs(pred.delta + total_time / 4.0) < 1e-8


def test_reference_phase_sign_discrepancy(
    atlas, sections, transitions, tables_cache
):
    """The quoted closed-form factor for this loop has the opposite sign to
    the assembled holonomy; the exact propagator sides with the assembly
    (see test_prediction_matches_exact_propagation), so both are surfaced."""
    schedule = kicked_linear_loop(atlas, 16)
    reference = worked_loop_reference_phase(1.0, schedule.total_time)
    hol = surface_holonomy(
        sections, transitions, atlas, schedule, tables_cache=tables_cache
    )
    assert abs(hol.gamma + reference) < 1e-6
    assert abs(hol.gamma - reference) > 1.9


def test_odd_kick_counts_show_second_order_decay(
    model, atlas, sections, transitions, tables_cache
):
    """Odd kick counts break the pairing, leaving a genuine adiabatic error
    that falls by about four per doubling; the phase error stays pinned at
    the differencing floor throughout."""
    table = verify_against_exact(
        model,
        sections,
        transitions,
        atlas,
        _linear_factory(atlas),
        [9, 17, 33, 65],
        tables_cache=tables_cache,
    )
    deficits = table.deficits()
    assert all(d > 1e-5 for d in deficits)
    assert all(b < a for a, b in zip(deficits, deficits[1:]))
    for a, b in zip(deficits, deficits[1:]):
        assert 3.0 < a / b < 4.3
    assert all(p < 1e-8 for p in table.phase_errors())


def test_even_ladder_sits_at_differencing_floor(
    model, atlas, sections, transitions, tables_cache
):
    table = verify_against_exact(
        model,
        sections,
        transitions,
        atlas,
        _linear_factory(atlas),
        [64, 128, 256, 512],
        tables_cache=tables_cache,
    )
    phases = table.phase_errors()
    assert all(abs(d) < 1e-12 for d in table.deficits())
    assert all(p < 1e-8 for p in phases)
    assert phases[-1] < 0.05
    assert phases[-1] <= phases[0] * 1.05 + 1e-15


def test_finer_parameter_grid_lowers_floor(model, atlas, sections, transitions):
    """The flat phase error of the even ladder is the fourth-order
    differencing systematic of the section tables: doubling the parameter
    grid drops it by about sixteen."""
    coarse = verify_against_exact(
        model, sections, transitions, atlas, _linear_factory(atlas), [64]
    ).rows[0]
    fine_sections = build_canonical_sections(
        model, atlas, branch=0, n_lambda=1024, n_theta=1024
    )
    fine_transitions = compute_all_transitions(fine_sections, atlas)
    fine = verify_against_exact(
        model, fine_sections, fine_transitions, atlas, _linear_factory(atlas), [64]
    ).rows[0]
    assert coarse.phase_error / fine.phase_error > 10.0


# ---------------------------------------------------------------------------
# assembly properties
# ---------------------------------------------------------------------------


def test_handoff_placement_independence(
    model, atlas, sections, transitions, tables_cache
):
    phases = []
    for shift in (-0.25, -0.1, 0.0, 0.1, 0.25):
        moved = tuple(h + shift for h in HANDOFFS)
        factory = lambda k, hp=moved: kicked_linear_loop(atlas, k, handoff_points=hp)
        row = verify_against_exact(
            model,
            sections,
            transitions,
            atlas,
            factory,
            [32],
            tables_cache=tables_cache,
        ).rows[0]
        phases.append(row.phase_error)
    assert max(phases) - min(phases) < 1e-6


def test_substitution_and_pullback_agree(atlas, sections, transitions, tables_cache):
    schedule = kicked_linear_loop(atlas, 32)
    sub = surface_holonomy(
        sections, transitions, atlas, schedule, method="substitution",
        tables_cache=tables_cache,
    )
    pull = surface_holonomy(
        sections, transitions, atlas, schedule, method="pullback",
        tables_cache=tables_cache,
    )
    assert abs(sub.log_gamma - pull.log_gamma) < 1e-10

    # without an analytic parameter velocity the pullback differentiates the
    # schedule numerically and stays within differencing accuracy
    no_dot = make_loop_schedule(
        atlas, schedule.lambda_of_t, schedule.total_time, [1, 2, 3, 1], list(HANDOFFS)
    )
    pull_fd = surface_holonomy(
        sections, transitions, atlas, no_dot, method="pullback",
        tables_cache=tables_cache,
    )
    assert abs(sub.log_gamma - pull_fd.log_gamma) < 1e-8


def test_breakdown_sums_to_exponent(atlas, sections, transitions, tables_cache):
    hol = surface_holonomy(
        sections,
        transitions,
        atlas,
        kicked_linear_loop(atlas, 32),
        tables_cache=tables_cache,
    )
    legs = sum(l["log_eta_m"] + l["log_eta_0"] for l in hol.leg_terms)
    edges = sum(e["log"] for e in hol.edge_terms)
    assert hol.log_gamma == legs + edges
    assert [e["winding"] for e in hol.edge_terms] == [0, 0, -1]
    assert abs(np.real(hol.log_gamma)) < 1e-10


def test_constant_parameter_loop(model, atlas, sections, transitions, tables_cache):
    """A loop that never moves the parameter exercises only the dynamical
    phase and the smooth-energy density; the prediction is then exact to
    quadrature accuracy."""
    factory = lambda k: make_loop_schedule(
        atlas, lambda t: 0.5, TWO_PI * k, [1], []
    )
    row = verify_against_exact(
        model, sections, transitions, atlas, factory, [64], tables_cache=tables_cache
    ).rows[0]
    assert abs(row.fidelity_deficit) < 1e-12
    assert row.phase_error < 1e-12


def test_dynamical_phase_reuses_leg_tables(atlas, sections, tables_cache):
    schedule = kicked_linear_loop(atlas, 16)
    delta = dynamical_phase(sections, atlas, schedule, tables_cache=tables_cache)
    assert abs(delta + schedule.total_time / 4.0) < 1e-8


# ---------------------------------------------------------------------------
# guards
# ---------------------------------------------------------------------------


def test_too_few_quadrature_nodes_raises(model, atlas, sections, transitions):
    factory = lambda k: make_loop_schedule(atlas, lambda t: 0.5, TWO_PI * k, [1], [])
    with pytest.raises(GridError):
        verify_against_exact(model, sections, transitions, atlas, factory, [16])


def test_coarse_theta_sections_rejected(model, atlas):
    small_sections = build_canonical_sections(
        model, atlas, branch=0, n_lambda=64, n_theta=128
    )
    small_transitions = compute_all_transitions(small_sections, atlas)
    with pytest.raises(GridError):
        surface_holonomy(
            small_sections, small_transitions, atlas, kicked_linear_loop(atlas, 32)
        )


def test_schedule_validation(atlas):
    lam = lambda t: 4.0 * np.pi * t / (TWO_PI * 32)
    total = TWO_PI * 32
    with pytest.raises(ScheduleError):
        make_loop_schedule(atlas, lam, 0.0, [1, 2], [0.5 * np.pi])
    with pytest.raises(ScheduleError):
        make_loop_schedule(atlas, lam, total, [1, 2, 3], [0.5 * np.pi])
    # handoff point outside the overlap of the two charts
    with pytest.raises(ScheduleError):
        make_loop_schedule(atlas, lam, total, [1, 2], [1.5 * np.pi])
    # schedule never reaches the requested handoff
    with pytest.raises(ScheduleError):
        make_loop_schedule(atlas, lambda t: 0.1, total, [1, 2], [0.5 * np.pi])
    # non-finite parameter values
    with pytest.raises(ScheduleError):
        make_loop_schedule(atlas, lambda t: float("nan"), total, [1, 2], [0.5 * np.pi])
    # second leg runs past the receiving chart's image
    with pytest.raises(ScheduleError):
        make_loop_schedule(atlas, lam, total, [1, 2], [0.5 * np.pi])
