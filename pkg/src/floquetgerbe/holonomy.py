"""Surface holonomy of the connective structure over a drive loop, and the
adiabatic prediction it generates.

A loop schedule sweeps the external parameter around its circle over a total
time T while the drive phase theta winds at omega0, tracing a closed surface
in (parameter, theta) space. The holonomy exponent accumulates chartwise
surface terms and overlap edge terms,

    log_gamma = sum_legs [ integral A_M(ell) dell + integral P0(ell(t)) dt ]
              + sum_handoffs i (phi^{ab} + n^{ab} omega0 t^{ab}),

with A_M(ell) the theta-integral of eta_M and P0(ell) the theta-integral of
eta_0 on the leg's own chart (P0 jumps by i n^{ab} omega0 across a handoff;
the edge term compensates, making the total independent of where the handoff
is placed inside the overlap). The adiabatic prediction for a state started
on the branch section is

    psi(T) = exp(i delta) exp(-log_gamma) |a(theta_T, ell_T)>,

with delta = -integral of the period-averaged smooth energy. Kick combs at
the period boundary contribute no separate dynamical term: their effect
enters through the quasienergies, and the period-resolved check against the
exact propagator fixes this bookkeeping unambiguously.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .atlas import CircleAtlas, LocalSection, extract_phi_at, _signed_lookup
from .errors import FloquetGerbeError, GridError, ScheduleError, VerificationError
from .gerbe import connection_forms
from .models import KickedTwoLevelModel
from .numerics import TWO_PI, simpson_nodes, theta_integral
from .propagator import propagate_exact


@dataclass(frozen=True)
class Handoff:
    """Chart change along the loop: from alpha to beta at time t_cross,
    where the parameter passes circle coordinate x_cross."""

    alpha: int
    beta: int
    t_cross: float
    x_cross: float


@dataclass(frozen=True)
class Segment:
    """One chartwise leg of the loop."""

    chart_index: int
    t_in: float
    t_out: float


@dataclass(frozen=True)
class LoopSchedule:
    """A parameter loop tiled into chartwise legs.

    lambda_of_t returns the unrolled circle coordinate (monotone schedules
    run from 0 to the circle circumference over [0, T]); segments tile
    [0, T] exactly, and handoffs sit at the segment boundaries.
    """

    total_time: float
    lambda_of_t: Callable = field(repr=False)
    segments: tuple = ()
    handoffs: tuple = ()
    lambda_dot: Callable | None = field(default=None, repr=False)

    def chart_path(self):
        return [s.chart_index for s in self.segments]


def make_loop_schedule(
    atlas: CircleAtlas,
    lambda_of_t: Callable,
    total_time: float,
    chart_path,
    handoff_points,
    lambda_dot: Callable | None = None,
    scan_points: int = 4096,
) -> LoopSchedule:
    """Tile a loop into chartwise legs, locating handoff times exactly.

    handoff_points[i] is the unrolled parameter value at which the loop
    leaves chart_path[i] for chart_path[i+1]; the crossing time is found by
    root bracketing on lambda_of_t, never by integrating a step function
    over a grid. Each handoff point must lie inside the pairwise overlap of
    the two charts, and each leg must stay inside its chart's image.
    """
    if total_time <= 0:
        raise ScheduleError("total_time must be positive")
    if len(handoff_points) != len(chart_path) - 1:
        raise ScheduleError("need exactly one handoff point per chart change")
    ts = np.linspace(0.0, total_time, scan_points)
    lams = np.array([float(lambda_of_t(t)) for t in ts])
    if not np.all(np.isfinite(lams)):
        raise ScheduleError("schedule produced non-finite parameter values")

    handoffs = []
    t_prev = 0.0
    for i, x_target in enumerate(handoff_points):
        a, b = chart_path[i], chart_path[i + 1]
        arcs = atlas.overlap(a, b)
        x_mod = np.mod(x_target, atlas.period)
        inside = any(s - 1e-12 < x_mod < s + w + 1e-12 or s - 1e-12 < x_mod + atlas.period < s + w + 1e-12
                     for s, w in arcs)
        if not inside:
            raise ScheduleError(
                f"handoff point {x_target:.6g} is outside the overlap of charts {a} and {b}"
            )
        mask = ts >= t_prev
        f = lams - x_target
        idx = np.where(mask[:-1] & (np.sign(f[:-1]) != np.sign(f[1:])))[0]
        if len(idx) == 0:
            raise ScheduleError(
                f"schedule never reaches handoff point {x_target:.6g} after t = {t_prev:.6g}"
            )
        k = idx[0]
        t_cross = brentq(lambda t: float(lambda_of_t(t)) - x_target, ts[k], ts[k + 1])
        if t_cross <= t_prev:
            raise ScheduleError("handoff times must be strictly increasing")
        handoffs.append(Handoff(alpha=a, beta=b, t_cross=float(t_cross), x_cross=float(x_target)))
        t_prev = t_cross

    bounds = [0.0] + [h.t_cross for h in handoffs] + [total_time]
    segments = tuple(
        Segment(chart_index=chart_path[i], t_in=bounds[i], t_out=bounds[i + 1])
        for i in range(len(chart_path))
    )
    for seg in segments:
        chart = atlas.chart(seg.chart_index)
        t_check = np.linspace(seg.t_in, seg.t_out, 64)
        for t in t_check[1:-1]:
            x = np.mod(float(lambda_of_t(float(t))), atlas.period)
            if not chart.contains_circle_point(x):
                raise ScheduleError(
                    f"leg on chart {seg.chart_index} leaves the chart image at t = {t:.6g}"
                )
    return LoopSchedule(
        total_time=float(total_time),
        lambda_of_t=lambda_of_t,
        segments=segments,
        handoffs=tuple(handoffs),
        lambda_dot=lambda_dot,
    )


def kicked_linear_loop(
    atlas: CircleAtlas,
    kick_count: int,
    omega0: float = 1.0,
    chart_path=(1, 2, 3, 1),
    handoff_points=(0.5 * np.pi, 2.5 * np.pi, 3.5 * np.pi),
) -> LoopSchedule:
    """Linear sweep once around the parameter circle in kick_count periods."""
    total_time = TWO_PI * kick_count / omega0
    period = atlas.period
    lam = lambda t: period * t / total_time
    lam_dot = lambda t: period / total_time
    return make_loop_schedule(
        atlas, lam, total_time, list(chart_path), list(handoff_points), lambda_dot=lam_dot
    )


# ---------------------------------------------------------------------------
# chartwise integrand tables
# ---------------------------------------------------------------------------


class _ChartTables:
    """Splined theta-integrated densities of one section.

    a_m(ell): theta-integral of eta_M; p0(ell): theta-integral of eta_0;
    e0(ell): period-averaged smooth energy. Cubic interpolation error is
    quartic in the section grid spacing, far below the quadrature budget.
    """

    def __init__(self, section: LocalSection):
        # purity_tol admits the h^4 real-part noise of differentiating a
        # gauged section; genuine corruption is caught far above this.
        forms = connection_forms(section, order=4, eta0_method="identity", purity_tol=1e-6)
        a_m = theta_integral(forms.eta_m, mode="auto", axis=1)
        p0 = theta_integral(forms.eta_0, mode="auto", axis=1)
        energy = forms.chi[:, None] + TWO_PI * 1j * forms.eta_0
        e0 = np.real(np.mean(energy, axis=1))
        grid = section.lambda_grid
        self.a_m = CubicSpline(grid, a_m)
        self.p0 = CubicSpline(grid, p0)
        self.e0 = CubicSpline(grid, e0)
        self.lo, self.hi = float(grid[0]), float(grid[-1])
        self.grid_h = float(grid[1] - grid[0])

    def check_range(self, ell_values: np.ndarray, chart_index: int):
        lo, hi = float(np.min(ell_values)), float(np.max(ell_values))
        if lo < self.lo - 1e-9 or hi > self.hi + 1e-9:
            raise GridError(
                f"leg parameter range [{lo:.6g}, {hi:.6g}] leaves the sampled grid of "
                f"chart {chart_index}"
            )


def _tables_for(sections: dict, cache: dict, idx: int) -> _ChartTables:
    if idx not in cache:
        cache[idx] = _ChartTables(sections[idx])
    return cache[idx]


def _leg_lift(atlas: CircleAtlas, chart_index: int, lam_values: np.ndarray) -> np.ndarray:
    chart = atlas.chart(chart_index)
    return np.array([chart.local_coordinate(np.mod(x, atlas.period)) for x in lam_values])


def _leg_node_count(
    kicks: float, span: float, grid_h: float, nodes_per_kick: float, min_leg_nodes: int
) -> int:
    """Simpson node count for one leg.

    Scales with the number of drive periods (the adiabatic refinement
    direction, giving the cubic error decay in the kick count) but never
    drops below twice the section table's own resolution across the leg's
    parameter span, so the quadrature resolves every feature the tables can
    represent — a rough gauge phase on a slow leg would otherwise be
    integrated on a handful of nodes.
    """
    shape = 2.0 * abs(span) / grid_h + 1.0
    return simpson_nodes(max(nodes_per_kick * kicks + 1.0, shape), min_leg_nodes)


def _edge_terms(sections: dict, transitions: dict, schedule: LoopSchedule, omega0: float):
    """i (phi^{ab} + n^{ab} omega0 t^{ab}) per handoff, with phi extracted
    exactly at the crossing point on the datum's unwrapped branch."""
    out = []
    for h in schedule.handoffs:
        sign, datum = _signed_lookup(transitions, h.alpha, h.beta)
        x = np.mod(h.x_cross, sections[h.alpha].chart.period)
        winding = int(round(sign * datum.winding_at(float(x))))
        phi = sign * extract_phi_at(sections[datum.alpha], sections[datum.beta], datum, float(x))
        out.append(
            {
                "alpha": h.alpha,
                "beta": h.beta,
                "t_cross": h.t_cross,
                "phi": float(phi),
                "winding": int(winding),
                "log": 1j * (phi + winding * omega0 * h.t_cross),
            }
        )
    return out


@dataclass(frozen=True)
class SurfaceHolonomy:
    """Holonomy exponent with its chartwise and edge breakdown."""

    log_gamma: complex
    leg_terms: tuple
    edge_terms: tuple
    method: str
    total_t_nodes: int

    @property
    def gamma(self) -> complex:
        return complex(np.exp(self.log_gamma))


def surface_holonomy(
    sections: dict,
    transitions: dict,
    atlas: CircleAtlas,
    schedule: LoopSchedule,
    method: str = "substitution",
    nodes_per_kick: float = 1.0,
    min_leg_nodes: int = 9,
    tables_cache: dict | None = None,
) -> SurfaceHolonomy:
    """Accumulate the holonomy exponent over the loop.

    Two independent assemblies of the same surface integral:

    - "substitution": the eta_M leg is converted to a definite parameter
      integral (A_M depends on t only through ell, so the time integrand
      A_M(ell(t)) dell/dt integrates to the dell line integral exactly,
      monotone or not); the eta_0 leg is a time integral. No dell/dt needed.
    - "pullback": both terms are integrated over t with the schedule's
      dell/dt in place, the literal pullback of the local two-form; edge
      contributions are theta-integrated over the edge fibre.

    Both use composite Simpson with the node count scaled to the number of
    drive periods in each leg, so the quadrature error falls as the cube of
    the kick count for a fixed loop shape.
    """
    omega0 = next(iter(sections.values())).omega0
    n_theta = len(next(iter(sections.values())).theta_grid)
    if n_theta < 256:
        raise GridError("surface holonomy needs sections sampled with n_theta >= 256")
    if tables_cache is None:
        tables_cache = {}

    legs = []
    total_nodes = 0
    period_t = TWO_PI / omega0
    for seg in schedule.segments:
        tables = _tables_for(sections, tables_cache, seg.chart_index)
        kicks = (seg.t_out - seg.t_in) / period_t
        ends = _leg_lift(
            atlas,
            seg.chart_index,
            np.array(
                [float(schedule.lambda_of_t(seg.t_in)), float(schedule.lambda_of_t(seg.t_out))]
            ),
        )
        span = float(ends[1] - ends[0])
        n_nodes = _leg_node_count(kicks, span, tables.grid_h, nodes_per_kick, min_leg_nodes)
        t_nodes = np.linspace(seg.t_in, seg.t_out, n_nodes)
        lam_nodes = np.array([float(schedule.lambda_of_t(float(t))) for t in t_nodes])
        ell_nodes = _leg_lift(atlas, seg.chart_index, lam_nodes)
        tables.check_range(ell_nodes, seg.chart_index)
        total_nodes += n_nodes

        if method == "substitution":
            ell_in, ell_out = ell_nodes[0], ell_nodes[-1]
            n_ell = n_nodes
            ell_q = np.linspace(ell_in, ell_out, n_ell)
            log_m = simpson(tables.a_m(ell_q), x=ell_q) if abs(ell_out - ell_in) > 0 else 0.0
            log_0 = simpson(tables.p0(ell_nodes), x=t_nodes)
        elif method == "pullback":
            if schedule.lambda_dot is not None:
                lam_dot = np.array([float(schedule.lambda_dot(float(t))) for t in t_nodes])
            else:
                h_fd = (seg.t_out - seg.t_in) * 1e-7 + 1e-12
                lam_dot = np.array(
                    [
                        (float(schedule.lambda_of_t(t + h_fd)) - float(schedule.lambda_of_t(t - h_fd)))
                        / (2 * h_fd)
                        for t in t_nodes
                    ]
                )
            integrand = lam_dot * tables.a_m(ell_nodes) + tables.p0(ell_nodes)
            log_m = 0.0
            log_0 = simpson(integrand, x=t_nodes)
        else:
            raise FloquetGerbeError(f"unknown holonomy method {method!r}")
        legs.append(
            {
                "chart": seg.chart_index,
                "t_in": seg.t_in,
                "t_out": seg.t_out,
                "log_eta_m": complex(log_m),
                "log_eta_0": complex(log_0),
                "nodes": int(n_nodes),
            }
        )

    if total_nodes < 64:
        raise GridError(
            f"holonomy quadrature used only {total_nodes} time nodes in total; need >= 64"
        )

    edges = _edge_terms(sections, transitions, schedule, omega0)
    if method == "pullback":
        # Edge fibre contribution assembled as a literal theta-circle
        # integral of the overlap one-form's dtheta component.
        thetas = next(iter(sections.values())).theta_grid
        for e in edges:
            samples = (1j / TWO_PI) * (e["phi"] + e["winding"] * omega0 * e["t_cross"]) * np.ones(
                len(thetas)
            )
            e["log"] = complex(theta_integral(samples, mode="periodic"))

    log_gamma = sum(l["log_eta_m"] + l["log_eta_0"] for l in legs) + sum(e["log"] for e in edges)
    if abs(np.real(log_gamma)) > 1e-6:
        raise VerificationError(
            f"holonomy exponent has a real part {np.real(log_gamma):.3e}; "
            "connection data is corrupt"
        )
    return SurfaceHolonomy(
        log_gamma=complex(log_gamma),
        leg_terms=tuple(legs),
        edge_terms=tuple(edges),
        method=method,
        total_t_nodes=total_nodes,
    )


def dynamical_phase(
    sections: dict,
    atlas: CircleAtlas,
    schedule: LoopSchedule,
    nodes_per_kick: float = 1.0,
    min_leg_nodes: int = 9,
    tables_cache: dict | None = None,
) -> float:
    """delta = -integral of the period-averaged smooth energy along the loop.

    The average uses the same chart tables as the holonomy; it is chart
    independent (sections differ by phases), so legs simply concatenate.
    """
    omega0 = next(iter(sections.values())).omega0
    if tables_cache is None:
        tables_cache = {}
    period_t = TWO_PI / omega0
    delta = 0.0
    for seg in schedule.segments:
        tables = _tables_for(sections, tables_cache, seg.chart_index)
        kicks = (seg.t_out - seg.t_in) / period_t
        ends = _leg_lift(
            atlas,
            seg.chart_index,
            np.array(
                [float(schedule.lambda_of_t(seg.t_in)), float(schedule.lambda_of_t(seg.t_out))]
            ),
        )
        span = float(ends[1] - ends[0])
        # Same node policy as the holonomy legs: the smooth-energy Simpson
        # error then cancels identically against the eta_0 legs, since both
        # integrate the same splined table on the same nodes.
        n_nodes = _leg_node_count(kicks, span, tables.grid_h, nodes_per_kick, min_leg_nodes)
        t_nodes = np.linspace(seg.t_in, seg.t_out, n_nodes)
        lam_nodes = np.array([float(schedule.lambda_of_t(float(t))) for t in t_nodes])
        ell_nodes = _leg_lift(atlas, seg.chart_index, lam_nodes)
        delta -= float(simpson(tables.e0(ell_nodes), x=t_nodes))
    return delta


@dataclass(frozen=True)
class AdiabaticPrediction:
    """Predicted final state and its phase bookkeeping."""

    psi: np.ndarray
    log_gamma: complex
    delta: float
    holonomy: SurfaceHolonomy
    final_chart: int
    ell_final: float
    theta_final: float


def adiabatic_prediction(
    sections: dict,
    transitions: dict,
    atlas: CircleAtlas,
    schedule: LoopSchedule,
    method: str = "substitution",
    nodes_per_kick: float = 1.0,
    tables_cache: dict | None = None,
) -> AdiabaticPrediction:
    """psi(T) = exp(i delta) exp(-log_gamma) |a(theta_T, ell_T)> on the
    final leg's chart."""
    cache: dict = {} if tables_cache is None else tables_cache
    hol = surface_holonomy(
        sections,
        transitions,
        atlas,
        schedule,
        method=method,
        nodes_per_kick=nodes_per_kick,
        tables_cache=cache,
    )
    delta = dynamical_phase(
        sections, atlas, schedule, nodes_per_kick=nodes_per_kick, tables_cache=cache
    )
    omega0 = next(iter(sections.values())).omega0
    last = schedule.segments[-1]
    lam_final = float(schedule.lambda_of_t(schedule.total_time))
    ell_final = _leg_lift(atlas, last.chart_index, np.array([lam_final]))[0]
    theta_final = float(np.mod(omega0 * schedule.total_time, TWO_PI))
    state = sections[last.chart_index].state_at(float(ell_final), np.array([theta_final]))[0]
    psi = np.exp(1j * delta - hol.log_gamma) * state
    return AdiabaticPrediction(
        psi=psi,
        log_gamma=hol.log_gamma,
        delta=delta,
        holonomy=hol,
        final_chart=last.chart_index,
        ell_final=float(ell_final),
        theta_final=theta_final,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    kick_count: int
    fidelity_deficit: float
    phase_error: float
    t_nodes: int


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple

    def phase_errors(self):
        return [r.phase_error for r in self.rows]

    def deficits(self):
        return [r.fidelity_deficit for r in self.rows]


def verify_against_exact(
    model: KickedTwoLevelModel,
    sections: dict,
    transitions: dict,
    atlas: CircleAtlas,
    schedule_factory: Callable,
    kick_counts,
    method: str = "substitution",
    nodes_per_kick: float = 1.0,
    tables_cache: dict | None = None,
) -> ConvergenceTable:
    """Compare the adiabatic prediction against brute-force propagation.

    schedule_factory(K) must return the loop stretched over K drive
    periods. The initial state is the branch section at the loop start with
    theta = 0. Rows report the fidelity deficit 1 - |<pred|exact>| and the
    relative phase error |arg <pred|exact>|.
    """
    rows = []
    if tables_cache is None:
        tables_cache = {}
    for k in kick_counts:
        schedule = schedule_factory(int(k))
        first = schedule.segments[0]
        ell0 = _leg_lift(
            atlas, first.chart_index, np.array([float(schedule.lambda_of_t(0.0))])
        )[0]
        psi0 = sections[first.chart_index].state_at(float(ell0), np.array([0.0]))[0]
        exact = propagate_exact(model, schedule.lambda_of_t, schedule.total_time).entries @ psi0
        pred = adiabatic_prediction(
            sections,
            transitions,
            atlas,
            schedule,
            method=method,
            nodes_per_kick=nodes_per_kick,
            tables_cache=tables_cache,
        )
        overlap = np.vdot(pred.psi, exact)
        rows.append(
            ConvergenceRow(
                kick_count=int(k),
                fidelity_deficit=float(1.0 - abs(overlap)),
                phase_error=float(abs(np.angle(overlap))),
                t_nodes=pred.holonomy.total_t_nodes,
            )
        )
    return ConvergenceTable(rows=tuple(rows))


def worked_loop_reference_phase(omega0: float, total_time: float) -> complex:
    """Closed-form holonomy factor quoted elsewhere for the linear loop
    around the full parameter circle of the resonant kicked model.

    The assembly implemented here, which the exact propagator confirms,
    yields the opposite sign: +exp(i omega0 T / 4). Reports carry both so
    the discrepancy stays visible.
    """
    return -np.exp(1j * omega0 * total_time / 4.0)
