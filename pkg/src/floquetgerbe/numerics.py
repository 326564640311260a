"""Shared numerical kernels: grids, quadratures, finite differences,
and eigendecomposition of unitary matrices.

All theta grids are uniform on the half-open interval [0, 2*pi); the drive
period boundary (where a kick may sit) is the excluded right endpoint.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import schur

from .errors import DegenerateSpectrumError, GridError, UnitarityError

TWO_PI = 2.0 * np.pi


def theta_grid(n: int) -> np.ndarray:
    """Uniform half-open grid on [0, 2*pi) with n samples."""
    if n < 4:
        raise GridError(f"theta grid needs at least 4 samples, got {n}")
    return np.linspace(0.0, TWO_PI, n, endpoint=False)


def assert_unitary(u: np.ndarray, tol: float = 1e-10, what: str = "matrix") -> None:
    """Raise UnitarityError unless u^dag u = 1 entrywise within tol."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise UnitarityError(f"{what} is not square: shape {u.shape}")
    resid = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if not np.isfinite(resid) or resid > tol:
        raise UnitarityError(f"{what} fails unitarity: max residual {resid:.3e} > {tol:.1e}")


def unitary_eigensystem(u: np.ndarray, tol: float = 1e-10):
    """Eigenphases and orthonormal eigenvectors of a unitary matrix.

    Uses a complex Schur decomposition, which is backward stable and keeps
    the eigenvector columns orthonormal even for nearly degenerate phases
    (unlike a generic nonsymmetric eigensolver). For a normal matrix the
    Schur form is diagonal, so the unitary factor's columns are eigenvectors.

    Returns
    -------
    phases : ndarray
        Eigenphases in [0, 2*pi), one per column, where the eigenvalue is
        exp(i*phase). Unsorted (Schur ordering).
    vectors : ndarray
        Orthonormal eigenvector columns.
    """
    u = np.asarray(u, dtype=complex)
    assert_unitary(u, tol=tol, what="eigensystem input")
    t, q = schur(u, output="complex")
    off = np.max(np.abs(t - np.diag(np.diag(t)))) if t.shape[0] > 1 else 0.0
    if off > 1e-8:
        # Schur triangular part vanishes for normal matrices; a large
        # residual means the input was not unitary enough after all.
        raise UnitarityError(f"Schur form not diagonal: off-diagonal {off:.3e}")
    phases = np.mod(np.angle(np.diag(t)), TWO_PI)
    return phases, q


def circular_gap(phases: np.ndarray, period: float = TWO_PI) -> float:
    """Smallest pairwise distance between phases on a circle of given period."""
    p = np.sort(np.mod(np.asarray(phases, dtype=float), period))
    if p.size < 2:
        return period
    diffs = np.diff(np.concatenate([p, [p[0] + period]]))
    return float(np.min(diffs))


def fix_phase_largest_component(v: np.ndarray) -> np.ndarray:
    """Rotate a vector's global phase so its largest-modulus entry is real positive.

    Ties are broken by the lowest index.
    """
    v = np.asarray(v, dtype=complex)
    mags = np.abs(v)
    k = int(np.argmax(mags > mags.max() - 1e-12))
    ph = v[k] / abs(v[k])
    return v / ph


def wrap_angle(x):
    """Map angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(y == -np.pi, np.pi, y) if np.ndim(x) else float(y if y != -np.pi else np.pi)


def theta_integral(samples: np.ndarray, mode: str = "auto", axis: int = -1) -> np.ndarray:
    """Integrate samples over one theta period from a half-open uniform grid.

    The grid omits the right endpoint, where the integrand may jump (a kick
    sits there). Three closures:

    - "periodic": rectangle rule (= periodic trapezoid), spectrally accurate
      for smooth periodic integrands but O(1/N) wrong across a jump;
    - "jump": closed trapezoid with the missing right-limit sample linearly
      extrapolated from the last two interior samples, exact for piecewise
      linear (sawtooth-like) integrands;
    - "auto" (default): picks "jump" when the extrapolated right limit
      disagrees with the first sample beyond a small relative tolerance.
    """
    f = np.asarray(samples)
    n = f.shape[axis]
    if n < 4:
        raise GridError(f"theta integral needs at least 4 samples, got {n}")
    h = TWO_PI / n
    f = np.moveaxis(f, axis, -1)
    if mode == "auto":
        right = 2.0 * f[..., -1] - f[..., -2]
        jump = np.max(np.abs(right - f[..., 0]))
        scale = np.max(np.abs(f)) + 1.0
        mode = "jump" if jump > 1e-8 * scale else "periodic"
    if mode == "periodic":
        return h * f.sum(axis=-1)
    if mode == "jump":
        right = 2.0 * f[..., -1] - f[..., -2]
        inner = f[..., 1:].sum(axis=-1)
        return h * (0.5 * f[..., 0] + inner + 0.5 * right)
    raise ValueError(f"unknown theta integral mode {mode!r}")


def theta_average(samples: np.ndarray, mode: str = "auto", axis: int = -1) -> np.ndarray:
    """Mean of samples over one theta period (theta_integral / 2*pi)."""
    return theta_integral(samples, mode=mode, axis=axis) / TWO_PI


# One-sided finite-difference stencils (uniform grid), rows are offsets 0..p.
_FD4_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_FD4_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
_FD2_EDGE0 = np.array([-3.0, 4.0, -1.0]) / 2.0


def fd_derivative(samples: np.ndarray, h: float, axis: int = -1, order: int = 4) -> np.ndarray:
    """Finite-difference first derivative on a uniform non-periodic grid.

    order=4: five-point central stencils inside, one-sided fourth-order
    stencils on the two samples at each edge. order=2: three-point central
    inside, one-sided second-order at the single edge sample. The grid is
    treated as an open interval; nothing wraps around.
    """
    f = np.moveaxis(np.asarray(samples), axis, -1)
    n = f.shape[-1]
    d = np.empty_like(f, dtype=np.result_type(f.dtype, float))
    if order == 4:
        if n < 6:
            raise GridError(f"order-4 derivative needs >= 6 samples, got {n}")
        d[..., 2:-2] = (-f[..., 4:] + 8.0 * f[..., 3:-1] - 8.0 * f[..., 1:-3] + f[..., :-4]) / 12.0
        d[..., 0] = np.tensordot(f[..., :5], _FD4_EDGE0, axes=([-1], [0]))
        d[..., 1] = np.tensordot(f[..., :5], _FD4_EDGE1, axes=([-1], [0]))
        d[..., -1] = -np.tensordot(f[..., -5:][..., ::-1], _FD4_EDGE0, axes=([-1], [0]))
        d[..., -2] = -np.tensordot(f[..., -5:][..., ::-1], _FD4_EDGE1, axes=([-1], [0]))
    elif order == 2:
        if n < 3:
            raise GridError(f"order-2 derivative needs >= 3 samples, got {n}")
        d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / 2.0
        d[..., 0] = np.tensordot(f[..., :3], _FD2_EDGE0, axes=([-1], [0]))
        d[..., -1] = -np.tensordot(f[..., -3:][..., ::-1], _FD2_EDGE0, axes=([-1], [0]))
    else:
        raise ValueError(f"unsupported derivative order {order}")
    return np.moveaxis(d / h, -1, axis)


def simpson_nodes(count_hint: int, minimum: int = 65) -> int:
    """Odd node count >= minimum for composite Simpson quadrature."""
    n = max(int(count_hint), int(minimum))
    return n if n % 2 == 1 else n + 1


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0
