"""Chart atlases over a parameter circle, local quasienergy sections,
and the transition data glueing them.

The external parameter lives on a circle of circumference ``period``. Each
chart is an open interval (lo, hi) in a lifted coordinate, with width below
the period, wrapped onto the circle. A local section assigns to every chart
parameter a quasienergy state, built by continuing a monodromy eigenvector
family in the parameter with phases fixed at theta = 0 (consecutive overlaps
made real positive). On a pairwise overlap two sections of the same physical
branch differ by

    <a_alpha(theta) | a_beta(theta)> = exp(i phi^{ab}) exp(i n^{ab} theta),

a scalar phase plus an integer winding in theta; n^{ab} is the Floquet-block
mismatch of the two chartwise labellings. Triple sums of phi are quantized,
(phi^{ab} + phi^{bg} + phi^{ga}) = 2*pi*z^{abg} with integer z, and the
integer windings satisfy the exact cocycle rule n^{ab} + n^{bg} + n^{ga} = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    BranchMismatchError,
    ContinuationError,
    CrossingError,
    FloquetGerbeError,
    GridError,
    VerificationError,
)
from .models import KickedTwoLevelModel, PeriodicHamiltonianModel
from .numerics import (
    TWO_PI,
    circular_gap,
    fix_phase_largest_component,
    theta_grid,
    unitary_eigensystem,
)
from .propagator import monodromy as kicked_monodromy
from .propagator import ode_propagator_samples, propagate_ode

_ARC_TOL = 1e-12


# ---------------------------------------------------------------------------
# charts and arc algebra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Open interval (lo, hi) in a lifted circle coordinate."""

    index: int
    lo: float
    hi: float
    period: float

    def __post_init__(self):
        if not (0.0 < self.width < self.period):
            raise FloquetGerbeError(
                f"chart {self.index}: width must lie in (0, period), got {self.width}"
            )

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def arc(self):
        """Image on the circle as (start, length) with start in [0, period)."""
        return (np.mod(self.lo, self.period), self.width)

    def local_coordinate(self, x: float) -> float:
        """Lift a circle coordinate into this chart's interval."""
        ell = self.lo + np.mod(x - self.lo, self.period)
        if ell > self.hi + 1e-9:
            raise GridError(
                f"circle point {x} lies outside chart {self.index} ({self.lo}, {self.hi})"
            )
        return float(min(ell, self.hi))

    def contains_circle_point(self, x: float, margin: float = 0.0) -> bool:
        off = np.mod(x - self.lo, self.period)
        return margin < off < self.width - margin


def intersect_arc_lists(arcs_a, arcs_b, period: float):
    """Intersection of two unions of open circle arcs, as a sorted arc list.

    Each arc is (start, length) with start in [0, period) and length below
    the period; a pair of wide arcs can meet in two components, so the
    result is a list.
    """
    out = []
    for sa, wa in arcs_a:
        for sb, wb in arcs_b:
            for shift in (-period, 0.0, period):
                lo = max(sa, sb + shift)
                hi = min(sa + wa, sb + shift + wb)
                if hi - lo > _ARC_TOL:
                    out.append((np.mod(lo, period), hi - lo))
    out.sort()
    dedup = []
    for arc in out:
        if not any(abs(arc[0] - s) < _ARC_TOL and abs(arc[1] - w) < _ARC_TOL for s, w in dedup):
            dedup.append(arc)
    return dedup


def _covers_circle(arcs, period: float) -> float | None:
    """None if the arcs cover the circle, else a coordinate inside a gap."""
    if not arcs:
        return 0.0
    arcs = sorted(arcs)
    s0 = arcs[0][0]
    reach = s0
    extended = [(s, w) for s, w in arcs] + [(s + period, w) for s, w in arcs]
    for s, w in extended:
        if s > reach + _ARC_TOL:
            return float(np.mod(0.5 * (reach + s), period))
        reach = max(reach, s + w)
        if reach >= s0 + period - _ARC_TOL:
            return None
    return float(np.mod(reach, period))


@dataclass(frozen=True)
class CircleAtlas:
    """Charts on a parameter circle with precomputed overlap arcs."""

    period: float
    charts: tuple
    pairwise: dict = field(repr=False)
    triples: dict = field(repr=False)
    quadruples: dict = field(repr=False)

    def chart(self, index: int) -> Chart:
        for c in self.charts:
            if c.index == index:
                return c
        raise KeyError(f"no chart with index {index}")

    def overlap(self, a: int, b: int):
        key = (min(a, b), max(a, b))
        return self.pairwise.get(key, [])

    def traversal_order(self):
        """Chart indices ordered by arc start around the circle."""
        return [c.index for c in sorted(self.charts, key=lambda c: c.arc[0])]


def build_circle_atlas(period: float, chart_ranges, indices=None) -> CircleAtlas:
    """Build an atlas from (lo, hi) chart ranges and validate the cover.

    Raises if any chart is not a proper open subset of the circle or if the
    union of chart images leaves a gap.
    """
    if period <= 0:
        raise FloquetGerbeError("period must be positive")
    if indices is None:
        indices = list(range(1, len(chart_ranges) + 1))
    charts = tuple(
        Chart(index=i, lo=float(lo), hi=float(hi), period=period)
        for i, (lo, hi) in zip(indices, chart_ranges)
    )
    gap = _covers_circle([c.arc for c in charts], period)
    if gap is not None:
        raise FloquetGerbeError(f"charts do not cover the circle: gap near x = {gap:.6g}")

    pairwise = {}
    idx = sorted(c.index for c in charts)
    by_idx = {c.index: c for c in charts}
    for i, a in enumerate(idx):
        for b in idx[i + 1 :]:
            arcs = intersect_arc_lists([by_idx[a].arc], [by_idx[b].arc], period)
            if arcs:
                pairwise[(a, b)] = arcs
    triples = {}
    for i, a in enumerate(idx):
        for j, b in enumerate(idx[i + 1 :], start=i + 1):
            for g in idx[j + 1 :]:
                if (a, b) not in pairwise:
                    continue
                arcs = intersect_arc_lists(pairwise[(a, b)], [by_idx[g].arc], period)
                if arcs:
                    triples[(a, b, g)] = arcs
    quadruples = {}
    for (a, b, g), arcs_abg in triples.items():
        for dlt in idx:
            if dlt <= g:
                continue
            arcs = intersect_arc_lists(arcs_abg, [by_idx[dlt].arc], period)
            if arcs:
                quadruples[(a, b, g, dlt)] = arcs
    return CircleAtlas(
        period=period, charts=charts, pairwise=pairwise, triples=triples, quadruples=quadruples
    )


def canonical_kicked_atlas(period: float = 2.0 * TWO_PI) -> CircleAtlas:
    """Three-chart cover of the double-period parameter circle.

    Chart ranges (-pi, pi), (0, 3*pi), (2*pi, 4*pi): consecutive pairs
    overlap in single arcs and no triple overlap exists.
    """
    if abs(period - 2.0 * TWO_PI) > 1e-12:
        raise FloquetGerbeError("canonical atlas is defined on the 4*pi circle")
    return build_circle_atlas(
        period, [(-np.pi, np.pi), (0.0, 3.0 * np.pi), (TWO_PI, 2.0 * TWO_PI)]
    )


# ---------------------------------------------------------------------------
# model backends: monodromy and propagator rows per parameter value
# ---------------------------------------------------------------------------


class _KickedBackend:
    def __init__(self, model: KickedTwoLevelModel):
        self.model = model
        self.omega0 = model.omega0
        self.dim = 2

    def monodromy(self, lam: float) -> np.ndarray:
        return kicked_monodromy(self.model, lam)

    def apply_u(self, lam: float, thetas: np.ndarray, vec: np.ndarray) -> np.ndarray:
        """U(theta) |vec| for every theta, shape (n_theta, d).

        Inside the open period the kicked propagator is diagonal free
        evolution, independent of the kick strength.
        """
        ratio = self.model.omega1 / (2.0 * self.model.omega0)
        out = np.empty((len(thetas), 2), dtype=complex)
        out[:, 0] = vec[0]
        out[:, 1] = vec[1] * np.exp(-1j * ratio * np.asarray(thetas))
        return out

    def smooth_energy(self, lam: float, thetas: np.ndarray, states: np.ndarray) -> np.ndarray:
        h = self.model.h_smooth()
        return np.real(np.einsum("ki,ij,kj->k", states.conj(), h, states))


class _OdeBackend:
    def __init__(self, model: PeriodicHamiltonianModel, r_of_lambda: Callable, steps: int = 4096):
        self.model = model
        self.omega0 = model.omega0
        self.dim = model.dim
        self.r_of_lambda = r_of_lambda
        self.steps = steps
        self._cache = {}

    def _samples(self, lam: float, n_theta: int):
        key = (round(lam, 12), n_theta)
        if key not in self._cache:
            thetas = theta_grid(n_theta)
            per = max(1, self.steps // n_theta)
            self._cache[key] = ode_propagator_samples(
                self.model, self.r_of_lambda(lam), thetas, steps_per_sample=per
            )
        return self._cache[key]

    def monodromy(self, lam: float) -> np.ndarray:
        return propagate_ode(self.model, self.r_of_lambda(lam), steps=self.steps)

    def apply_u(self, lam: float, thetas: np.ndarray, vec: np.ndarray) -> np.ndarray:
        samples, _ = self._samples(lam, len(thetas))
        return samples @ vec

    def smooth_energy(self, lam: float, thetas: np.ndarray, states: np.ndarray) -> np.ndarray:
        r = self.r_of_lambda(lam)
        out = np.empty(len(thetas))
        for k, th in enumerate(thetas):
            h = self.model.h_at(r, th)
            out[k] = np.real(np.vdot(states[k], h @ states[k]))
        return out


def _backend_for(model, r_of_lambda=None):
    if isinstance(model, KickedTwoLevelModel):
        return _KickedBackend(model)
    if isinstance(model, PeriodicHamiltonianModel):
        if r_of_lambda is None:
            raise FloquetGerbeError("generic models need r_of_lambda to map chart parameter to R")
        return _OdeBackend(model, r_of_lambda)
    raise FloquetGerbeError(f"unsupported model type {type(model).__name__}")


# ---------------------------------------------------------------------------
# local sections
# ---------------------------------------------------------------------------


@dataclass
class LocalSection:
    """Quasienergy states over one chart, smooth in the chart parameter.

    The eigenvector family mu(ell) is continued from an anchor sample with
    consecutive overlaps <mu_k | mu_{k+1}> made real positive (a phase
    convention at theta = 0), and the quasienergy chi(ell) is continued
    across the principal-window edge by integer block reassignment, so both
    are smooth along the chart. States are evaluated as

        |a(theta, ell)> = exp(i chi(ell) theta / omega0) U_ell(theta) |mu(ell)>.
    """

    chart: Chart
    lambda_grid: np.ndarray
    chi: np.ndarray
    mu_vectors: np.ndarray
    theta_grid: np.ndarray
    omega0: float
    backend: object = field(repr=False)
    gauge_eps: Callable | None = field(default=None, repr=False)
    _states: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.mu_vectors.shape[1]

    def states(self) -> np.ndarray:
        """Dense state samples, shape (n_lambda, n_theta, dim). Cached."""
        if self._states is None:
            n_l, n_t = len(self.lambda_grid), len(self.theta_grid)
            out = np.empty((n_l, n_t, self.dim), dtype=complex)
            for k, ell in enumerate(self.lambda_grid):
                rows = self.backend.apply_u(float(ell), self.theta_grid, self.mu_vectors[k])
                out[k] = np.exp(1j * self.chi[k] * self.theta_grid / self.omega0)[:, None] * rows
                if self.gauge_eps is not None:
                    out[k] *= np.exp(1j * self.gauge_eps(float(ell)))
            self._states = out
        return self._states

    def nearest_index(self, ell: float) -> int:
        return int(np.argmin(np.abs(self.lambda_grid - ell)))

    def eigvec_at(self, ell: float, margin: float = 1e-3):
        """Monodromy eigenvector and chi at an off-grid chart parameter.

        One continuation step from the nearest stored sample: same branch
        selection, phase fixing, and block assignment rules as the builder,
        so the result lies on the section's smooth family.
        """
        if not (self.chart.lo - 1e-9 <= ell <= self.chart.hi + 1e-9):
            raise GridError(f"parameter {ell} outside chart {self.chart.index}")
        k = self.nearest_index(ell)
        prev = self.mu_vectors[k]
        vec, chi_t = _pick_branch(self.backend, float(ell), prev, margin)
        block = np.rint((self.chi[k] - chi_t) / self.omega0)
        chi = chi_t + block * self.omega0
        if abs(chi - self.chi[k]) > self.omega0 / 4.0:
            raise GridError("off-grid continuation jumped by more than omega0/4")
        return vec, float(chi)

    def state_at(self, ell: float, thetas: np.ndarray | None = None) -> np.ndarray:
        """State samples at an arbitrary chart parameter, shape (n_theta, dim)."""
        thetas = self.theta_grid if thetas is None else np.atleast_1d(thetas)
        vec, chi = self.eigvec_at(ell)
        rows = self.backend.apply_u(float(ell), thetas, vec)
        out = np.exp(1j * chi * thetas / self.omega0)[:, None] * rows
        if self.gauge_eps is not None:
            out = out * np.exp(1j * self.gauge_eps(float(ell)))
        return out

    def chi_at(self, ell: float) -> float:
        return self.eigvec_at(ell)[1]

    def smooth_energy_at(self, ell: float) -> float:
        """Period-average of <a|H_smooth|a> at a chart parameter."""
        vec, chi = self.eigvec_at(ell)
        rows = self.backend.apply_u(float(ell), self.theta_grid, vec)
        e = self.backend.smooth_energy(float(ell), self.theta_grid, rows)
        return float(np.mean(e))


def _pick_branch(backend, lam: float, reference: np.ndarray, margin: float = 1e-3):
    """Select the monodromy eigenbranch best aligned with a reference vector.

    Raises ContinuationError when the best and runner-up overlaps are within
    ``margin`` of each other, and CrossingError when the eigenphase gap
    collapses.
    """
    mono = backend.monodromy(lam)
    zeta, vecs = unitary_eigensystem(mono)
    gap = circular_gap(zeta) * backend.omega0 / TWO_PI
    if gap < 1e-6 * backend.omega0:
        raise CrossingError(
            f"quasienergy crossing at parameter {lam:.6g} (gap {gap:.3e})", location=lam
        )
    overlaps = np.abs(vecs.conj().T @ reference)
    order = np.argsort(overlaps)[::-1]
    best, second = order[0], order[1] if len(order) > 1 else None
    if second is not None and overlaps[best] - overlaps[second] < margin:
        raise ContinuationError(
            f"ambiguous branch continuation at parameter {lam:.6g}: "
            f"overlaps {overlaps[best]:.4f} vs {overlaps[second]:.4f}"
        )
    vec = vecs[:, best]
    phase = np.vdot(reference, vec)
    vec = vec * (abs(phase) / phase) if phase != 0 else vec
    chi_tilde = np.mod(-zeta[best], TWO_PI) * backend.omega0 / TWO_PI
    return vec, float(chi_tilde)


def build_local_section(
    model,
    chart: Chart,
    anchor_ell: float,
    anchor_chi: float,
    n_lambda: int = 512,
    n_theta: int = 1024,
    seed_vector: np.ndarray | None = None,
    r_of_lambda: Callable | None = None,
) -> LocalSection:
    """Continue a quasienergy branch over one chart.

    The anchor selects the branch: at the grid sample nearest ``anchor_ell``
    the eigenvector is chosen by overlap with ``seed_vector`` when given,
    else by circular proximity of the principal quasienergy to
    ``anchor_chi``; its phase is fixed by making the largest-modulus
    component real positive, and its Floquet block by rounding to
    ``anchor_chi``. Continuation then sweeps outward in both directions.
    """
    if n_lambda < 16:
        raise GridError(f"section needs at least 16 parameter samples, got {n_lambda}")
    backend = _backend_for(model, r_of_lambda)
    thetas = theta_grid(n_theta)
    h = chart.width / n_lambda
    grid = chart.lo + (np.arange(n_lambda) + 0.5) * h

    k0 = int(np.argmin(np.abs(grid - anchor_ell)))
    mono = backend.monodromy(float(grid[k0]))
    zeta, vecs = unitary_eigensystem(mono)
    gap = circular_gap(zeta) * backend.omega0 / TWO_PI
    if gap < 1e-6 * backend.omega0:
        raise CrossingError(
            f"quasienergy crossing at anchor parameter {grid[k0]:.6g}", location=float(grid[k0])
        )
    chi_t = np.mod(-zeta, TWO_PI) * backend.omega0 / TWO_PI
    if seed_vector is not None:
        j = int(np.argmax(np.abs(vecs.conj().T @ np.asarray(seed_vector, dtype=complex))))
    else:
        dist = np.abs(np.mod(chi_t - anchor_chi + backend.omega0 / 2, backend.omega0) - backend.omega0 / 2)
        j = int(np.argmin(dist))
    mu0 = fix_phase_largest_component(vecs[:, j])
    block0 = np.rint((anchor_chi - chi_t[j]) / backend.omega0)
    chi0 = chi_t[j] + block0 * backend.omega0

    dim = backend.dim
    mu = np.empty((n_lambda, dim), dtype=complex)
    chi = np.empty(n_lambda)
    mu[k0], chi[k0] = mu0, chi0
    for k in range(k0 + 1, n_lambda):
        vec, ct = _pick_branch(backend, float(grid[k]), mu[k - 1])
        block = np.rint((chi[k - 1] - ct) / backend.omega0)
        chi[k] = ct + block * backend.omega0
        mu[k] = vec
        if abs(chi[k] - chi[k - 1]) > backend.omega0 / 4.0:
            raise GridError(
                f"adjacent quasienergies differ by more than omega0/4 near {grid[k]:.6g}; "
                "parameter grid too coarse"
            )
    for k in range(k0 - 1, -1, -1):
        vec, ct = _pick_branch(backend, float(grid[k]), mu[k + 1])
        block = np.rint((chi[k + 1] - ct) / backend.omega0)
        chi[k] = ct + block * backend.omega0
        mu[k] = vec
        if abs(chi[k] - chi[k + 1]) > backend.omega0 / 4.0:
            raise GridError(
                f"adjacent quasienergies differ by more than omega0/4 near {grid[k]:.6g}; "
                "parameter grid too coarse"
            )
    return LocalSection(
        chart=chart,
        lambda_grid=grid,
        chi=chi,
        mu_vectors=mu,
        theta_grid=thetas,
        omega0=backend.omega0,
        backend=backend,
    )


def build_canonical_sections(
    model: KickedTwoLevelModel,
    atlas: CircleAtlas,
    branch: int = 0,
    n_lambda: int = 512,
    n_theta: int = 1024,
) -> dict:
    """One section per chart for a kicked-model branch, each anchored at its
    chart midpoint on the linear quasienergy line chi = ell*omega0/(4*pi)
    (plus omega0/2 for the upper branch)."""
    sections = {}
    offset = 0.0 if branch == 0 else model.omega0 / 2.0
    for chart in atlas.charts:
        mid = 0.5 * (chart.lo + chart.hi)
        sections[chart.index] = build_local_section(
            model,
            chart,
            anchor_ell=mid,
            anchor_chi=mid * model.omega0 / (2.0 * TWO_PI) + offset,
            n_lambda=n_lambda,
            n_theta=n_theta,
        )
    return sections


# ---------------------------------------------------------------------------
# transition data
# ---------------------------------------------------------------------------


def _circle_distance(u, v, period: float):
    return np.abs(np.mod(u - v + period / 2.0, period) - period / 2.0)


@dataclass(frozen=True)
class TransitionDatum:
    """Scalar phase and integer winding relating two sections on an overlap.

    The winding is locally constant, one integer per connected overlap arc
    (wide charts genuinely carry different windings on different components
    of the same pairwise overlap). phi samples are unwrapped along each arc;
    x_samples are circle coordinates strictly inside the arcs.
    """

    alpha: int
    beta: int
    windings: tuple
    arcs: tuple
    x_samples: tuple
    phi_samples: tuple
    period: float

    def reversed(self) -> "TransitionDatum":
        return TransitionDatum(
            alpha=self.beta,
            beta=self.alpha,
            windings=tuple(-w for w in self.windings),
            arcs=self.arcs,
            x_samples=self.x_samples,
            phi_samples=tuple(tuple(-v for v in arc) for arc in self.phi_samples),
            period=self.period,
        )

    def arc_index_of(self, x: float) -> int:
        """Index of the overlap arc containing circle coordinate x."""
        for k, (start, width) in enumerate(self.arcs):
            if np.mod(x - start, self.period) <= width + 1e-9:
                return k
        raise GridError(
            f"circle coordinate {x:.6g} lies in no arc of the ({self.alpha}, {self.beta}) overlap"
        )

    def winding_at(self, x: float) -> int:
        return int(self.windings[self.arc_index_of(x)])

    def phi_near(self, x: float) -> float:
        """Stored phi at the nearest sample within the arc containing x."""
        k = self.arc_index_of(x)
        xs = np.asarray(self.x_samples[k])
        j = int(np.argmin(_circle_distance(xs, x, self.period)))
        return float(self.phi_samples[k][j])


def _overlap_ratio(section_a: LocalSection, section_b: LocalSection, x: float) -> np.ndarray:
    ell_a = section_a.chart.local_coordinate(x)
    ell_b = section_b.chart.local_coordinate(x)
    sa = section_a.state_at(ell_a)
    sb = section_b.state_at(ell_b)
    return np.einsum("ki,ki->k", sa.conj(), sb)


def _dominant_winding(ratio: np.ndarray) -> tuple[int, float]:
    n_t = len(ratio)
    c = np.fft.fft(ratio) / n_t
    power = np.abs(c) ** 2
    k = int(np.argmax(power))
    weight = float(power[k] / power.sum())
    winding = k if k <= n_t // 2 else k - n_t
    return winding, weight


def compute_transition_datum(
    section_a: LocalSection,
    section_b: LocalSection,
    atlas: CircleAtlas,
    n_samples: int = 64,
    min_mode_weight: float = 0.999,
) -> TransitionDatum:
    """Extract (phi, n) relating two sections on their chart overlap.

    At each overlap sample the pointwise ratio <a_alpha|a_beta>(theta) is
    Fourier-analyzed over theta; a single winding mode must dominate, its
    index giving the integer n and its demodulated mean the scalar phi.
    phi is unwrapped along each arc; the winding must be constant within an
    arc but may differ between disconnected arcs of the same overlap.
    """
    arcs = atlas.overlap(section_a.chart.index, section_b.chart.index)
    if not arcs:
        raise GridError(
            f"charts {section_a.chart.index} and {section_b.chart.index} do not overlap"
        )
    if n_samples < 8:
        raise GridError("overlaps must be probed with at least 8 samples")
    for sec in (section_a, section_b):
        inside = sum(
            1
            for ell in sec.lambda_grid
            if any(
                Chart(0, s, s + w, atlas.period).contains_circle_point(np.mod(ell, atlas.period))
                for s, w in arcs
            )
        )
        if inside < 8:
            raise GridError(
                f"section on chart {sec.chart.index} has only {inside} grid samples in the "
                "overlap; need at least 8"
            )

    windings = []
    all_x, all_phi = [], []
    for start, width in arcs:
        xs = start + (np.arange(n_samples) + 0.5) * width / n_samples
        raw = np.empty(n_samples)
        winding = None
        for i, x in enumerate(xs):
            ratio = _overlap_ratio(section_a, section_b, float(x))
            mean_mag = float(np.mean(np.abs(ratio)))
            if mean_mag < 0.9:
                raise BranchMismatchError(
                    f"sections overlap with |<a|b>| ~ {mean_mag:.3f} at x = {x:.6g}; "
                    "not the same physical branch"
                )
            n_i, weight = _dominant_winding(ratio)
            if weight < min_mode_weight:
                raise BranchMismatchError(
                    f"no dominant winding mode at x = {x:.6g} (best weight {weight:.4f})"
                )
            if winding is None:
                winding = n_i
            elif n_i != winding:
                raise BranchMismatchError(
                    f"winding changed from {winding} to {n_i} within one overlap arc"
                )
            demod = np.mean(ratio * np.exp(-1j * winding * section_a.theta_grid))
            raw[i] = np.angle(demod)
        windings.append(int(winding))
        all_x.append(tuple(float(v) for v in xs))
        all_phi.append(tuple(float(v) for v in np.unwrap(raw)))
    return TransitionDatum(
        alpha=section_a.chart.index,
        beta=section_b.chart.index,
        windings=tuple(windings),
        arcs=tuple(arcs),
        x_samples=tuple(all_x),
        phi_samples=tuple(all_phi),
        period=atlas.period,
    )


def extract_phi_at(
    section_a: LocalSection, section_b: LocalSection, datum: TransitionDatum, x: float
) -> float:
    """Exact phi^{ab} at one overlap point, on the datum's unwrapped branch."""
    ratio = _overlap_ratio(section_a, section_b, x)
    demod = np.mean(ratio * np.exp(-1j * datum.winding_at(x) * section_a.theta_grid))
    phi_raw = float(np.angle(demod))
    ref = datum.phi_near(x)
    return phi_raw + TWO_PI * np.rint((ref - phi_raw) / TWO_PI)


def compute_all_transitions(sections: dict, atlas: CircleAtlas, n_samples: int = 64) -> dict:
    """Transition data for every overlapping ordered pair (a < b)."""
    out = {}
    idx = sorted(sections)
    for i, a in enumerate(idx):
        for b in idx[i + 1 :]:
            if atlas.overlap(a, b):
                out[(a, b)] = compute_transition_datum(
                    sections[a], sections[b], atlas, n_samples=n_samples
                )
    return out


def _signed_lookup(transitions: dict, a: int, b: int) -> tuple[float, TransitionDatum]:
    """(sign, datum) for the ordered pair (a, b); the datum is stored for
    the ascending pair, and sign = -1 means every extracted phi and winding
    must be negated to refer to (a, b)."""
    if (a, b) in transitions:
        return 1.0, transitions[(a, b)]
    if (b, a) in transitions:
        return -1.0, transitions[(b, a)]
    raise KeyError(f"no transition datum for pair ({a}, {b})")


def signed_phi_and_winding_at(
    sections: dict, transitions: dict, a: int, b: int, x: float
) -> tuple[float, int]:
    """(phi^{ab}(x), n^{ab}(x)) regardless of which ordering is stored."""
    sign, d = _signed_lookup(transitions, a, b)
    phi = sign * extract_phi_at(sections[d.alpha], sections[d.beta], d, x)
    return float(phi), int(round(sign * d.winding_at(x)))


# ---------------------------------------------------------------------------
# cocycle verification and cohomology classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CocycleReport:
    """Residuals of the cocycle conditions on every triple overlap, plus a
    record-consistency residual on every pairwise overlap."""

    z_values: dict
    winding_violations: tuple
    quantization_violations: tuple
    consistency_values: dict
    consistency_violations: tuple

    @property
    def ok(self) -> bool:
        return (
            not self.winding_violations
            and not self.quantization_violations
            and not self.consistency_violations
        )


def verify_cocycles(
    sections: dict,
    transitions: dict,
    atlas: CircleAtlas,
    tol: float = 1e-6,
    n_check: int = 8,
) -> CocycleReport:
    """Check both cocycle conditions on every triple overlap.

    Windings must satisfy n^{ab} + n^{bg} + n^{ga} = 0 pointwise (each
    winding evaluated on the overlap component containing the sample);
    scalar sums phi^{ab} + phi^{bg} + phi^{ga} must be integer multiples of
    2*pi within tol, constant on each connected triple-overlap arc, checked
    with exact phase re-extraction at fresh overlap samples (interpolation
    would pollute the quantization check). z_values holds one integer per
    arc of each triple overlap. Independently, every stored transition record is replayed
    against the sections it was built from: the recorded phase samples must
    match fresh extraction within tol, so a tampered or stale record is
    caught even though the invariant checks themselves re-extract.
    """
    z_values = {}
    bad_n, bad_q = [], []
    consistency = {}
    bad_c = []
    for (a, b), datum in transitions.items():
        worst_c = 0.0
        for xs_arc, phi_arc in zip(datum.x_samples, datum.phi_samples):
            stride = max(1, len(xs_arc) // n_check)
            for x, phi_rec in list(zip(xs_arc, phi_arc))[::stride]:
                fresh = extract_phi_at(sections[datum.alpha], sections[datum.beta], datum, x)
                worst_c = max(worst_c, abs(fresh - phi_rec))
        consistency[(a, b)] = worst_c
        if worst_c > tol:
            bad_c.append(((a, b), worst_c))
    for (a, b, g), arcs in atlas.triples.items():
        worst = 0.0
        z_per_arc = []
        for start, width in arcs:
            xs = start + (np.arange(n_check) + 0.5) * width / n_check
            z_here = None
            for x in xs:
                phi_ab, n_ab = signed_phi_and_winding_at(sections, transitions, a, b, x)
                phi_bg, n_bg = signed_phi_and_winding_at(sections, transitions, b, g, x)
                phi_ga, n_ga = signed_phi_and_winding_at(sections, transitions, g, a, x)
                if n_ab + n_bg + n_ga != 0:
                    bad_n.append(((a, b, g), float(x), n_ab + n_bg + n_ga))
                total = (phi_ab + phi_bg + phi_ga) / TWO_PI
                z_int = int(np.rint(total))
                resid = abs(total - z_int)
                if z_here is None:
                    z_here = z_int
                if z_int != z_here:
                    bad_q.append(((a, b, g), float("inf")))
                worst = max(worst, resid * TWO_PI)
            z_per_arc.append(z_here)
        z_values[(a, b, g)] = tuple(z_per_arc)
        if worst > tol:
            bad_q.append(((a, b, g), worst))
    return CocycleReport(
        z_values=z_values,
        winding_violations=tuple(bad_n),
        quantization_violations=tuple(bad_q),
        consistency_values=consistency,
        consistency_violations=tuple(bad_c),
    )


@dataclass(frozen=True)
class CohomologyClasses:
    """Integer invariants of the transition data.

    nu is the Floquet-block gain of a branch continued once around the
    parameter circle, measured against each chart's own section labels: the
    sum of n^{beta alpha} over forward handoffs alpha -> beta with the
    charts in circular traversal order, each winding evaluated at that
    handoff's natural crossing point. z_values maps each ascending triple
    to one integer per connected triple-overlap arc; w_values maps each
    ascending quadruple to the cup products n^{ab}(x) z^{bgd}(x), one per
    connected quadruple-overlap arc, evaluated at the arc midpoint (all the
    face values are locally constant there).
    """

    nu: int
    z_values: dict
    w_values: dict


def forward_handoff_point(atlas: CircleAtlas, a: int, b: int) -> float:
    """Midpoint of the forward handoff region from chart a to chart b.

    For consecutive charts in traversal order this is the middle of the
    stretch between chart b's start and chart a's end, the arc where the
    forward continuation naturally changes charts.
    """
    start_b = np.mod(atlas.chart(b).lo, atlas.period)
    end_a = np.mod(atlas.chart(a).hi, atlas.period)
    width = np.mod(end_a - start_b, atlas.period)
    return float(np.mod(start_b + width / 2.0, atlas.period))


def triple_z_at(
    sections: dict, transitions: dict, a: int, b: int, g: int, x: float, tol: float = 1e-6
) -> int:
    """Integer z^{abg}(x) = (phi^{ab} + phi^{bg} + phi^{ga})(x) / 2*pi."""
    phi_ab, _ = signed_phi_and_winding_at(sections, transitions, a, b, x)
    phi_bg, _ = signed_phi_and_winding_at(sections, transitions, b, g, x)
    phi_ga, _ = signed_phi_and_winding_at(sections, transitions, g, a, x)
    total = (phi_ab + phi_bg + phi_ga) / TWO_PI
    z = int(np.rint(total))
    if abs(total - z) * TWO_PI > tol:
        raise VerificationError(
            f"triple phase sum at x = {x:.6g} is {total * TWO_PI:.6g}, "
            f"not an integer multiple of 2*pi within {tol:g}"
        )
    return z


def compute_cohomology_classes(
    sections: dict, transitions: dict, atlas: CircleAtlas
) -> CohomologyClasses:
    order = atlas.traversal_order()
    nu = 0
    for i, a in enumerate(order):
        b = order[(i + 1) % len(order)]
        x_h = forward_handoff_point(atlas, a, b)
        _, n_ba = signed_phi_and_winding_at(sections, transitions, b, a, x_h)
        nu += n_ba
    report = verify_cocycles(sections, transitions, atlas)
    w_values = {}
    for (a, b, g, dlt), arcs in atlas.quadruples.items():
        vals = []
        for start, width in arcs:
            x_mid = start + width / 2.0
            _, n_ab = signed_phi_and_winding_at(sections, transitions, a, b, x_mid)
            z_bgd = triple_z_at(sections, transitions, b, g, dlt, x_mid)
            vals.append(int(n_ab * z_bgd))
        w_values[(a, b, g, dlt)] = tuple(vals)
    return CohomologyClasses(nu=int(nu), z_values=dict(report.z_values), w_values=w_values)


# ---------------------------------------------------------------------------
# anholonomy around the monodromy's own parameter period
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnholonomyResult:
    """Branch bookkeeping after continuing all branches around a loop.

    permutation[j] is the starting branch index that the continuation of
    branch j lands on; block_shifts[j] the integer multiple of omega0 the
    continued quasienergy gained relative to that branch's starting value.
    """

    permutation: tuple
    block_shifts: tuple
    chi_start: tuple
    chi_end: tuple


def detect_anholonomy(
    model,
    lambda_span=(0.0, TWO_PI),
    n_steps: int = 1024,
    r_of_lambda: Callable | None = None,
    margin: float = 1e-3,
) -> AnholonomyResult:
    """Continue every branch along a closed parameter loop and compare.

    Raises CrossingError (with the parameter location) when the eigenphase
    gap collapses along the way, including at the starting point.
    """
    backend = _backend_for(model, r_of_lambda)
    lam0, lam1 = float(lambda_span[0]), float(lambda_span[1])
    lams = np.linspace(lam0, lam1, n_steps + 1)

    zeta, vecs = unitary_eigensystem(backend.monodromy(lams[0]))
    gap = circular_gap(zeta) * backend.omega0 / TWO_PI
    if gap < 1e-6 * backend.omega0:
        raise CrossingError(
            f"quasienergy crossing at loop start (parameter {lams[0]:.6g})", location=lams[0]
        )
    order0 = np.argsort(np.mod(-zeta, TWO_PI))
    start_vecs = vecs[:, order0]
    chi_start = np.mod(-zeta[order0], TWO_PI) * backend.omega0 / TWO_PI

    cur_vecs = start_vecs.copy()
    chi = chi_start.copy()
    d = backend.dim
    for lam in lams[1:]:
        zeta, vecs = unitary_eigensystem(backend.monodromy(float(lam)))
        gap = circular_gap(zeta) * backend.omega0 / TWO_PI
        if gap < 1e-6 * backend.omega0:
            raise CrossingError(
                f"quasienergy crossing at parameter {lam:.6g} (gap {gap:.3e})", location=float(lam)
            )
        overlap = vecs.conj().T @ cur_vecs
        cost = -np.abs(overlap) ** 2
        rows, cols = linear_sum_assignment(cost)
        new_vecs = np.empty_like(cur_vecs)
        new_chi = np.empty(d)
        chi_t = np.mod(-zeta, TWO_PI) * backend.omega0 / TWO_PI
        for r, c in zip(rows, cols):
            mags = np.abs(overlap[:, c])
            second = np.sort(mags)[-2] if d > 1 else 0.0
            if mags[r] - second < margin:
                raise ContinuationError(
                    f"ambiguous branch assignment at parameter {lam:.6g}"
                )
            ph = overlap[r, c]
            new_vecs[:, c] = vecs[:, r] * (abs(ph) / ph)
            block = np.rint((chi[c] - chi_t[r]) / backend.omega0)
            new_chi[c] = chi_t[r] + block * backend.omega0
            if abs(new_chi[c] - chi[c]) > backend.omega0 / 4.0:
                raise GridError(
                    f"quasienergy step above omega0/4 at parameter {lam:.6g}; loop grid too coarse"
                )
        cur_vecs, chi = new_vecs, new_chi

    final_overlap = np.abs(start_vecs.conj().T @ cur_vecs)
    perm = []
    shifts = []
    for j in range(d):
        i = int(np.argmax(final_overlap[:, j]))
        if final_overlap[i, j] < 0.99:
            raise ContinuationError(
                f"continued branch {j} does not match any starting branch "
                f"(best overlap {final_overlap[i, j]:.4f})"
            )
        perm.append(i)
        shift = (chi[j] - chi_start[i]) / backend.omega0
        if abs(shift - np.rint(shift)) > 1e-6:
            raise FloquetGerbeError(
                f"block shift not integer for branch {j}: {shift:.8f}"
            )
        shifts.append(int(np.rint(shift)))
    return AnholonomyResult(
        permutation=tuple(perm),
        block_shifts=tuple(shifts),
        chi_start=tuple(float(c) for c in chi_start),
        chi_end=tuple(float(c) for c in chi),
    )
