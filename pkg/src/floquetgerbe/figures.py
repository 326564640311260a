"""Optional PNG rendering for CLI reports.

matplotlib is imported lazily inside each function so the library and the
default CLI paths never require a plotting backend; every figure here is
only produced behind the command line ``--figures`` flag.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def quasienergy_figure(path, families) -> Path:
    """Scatter the principal quasienergy window against the drive strength.

    ``families`` is a sequence of dicts with keys ``ratio`` (float),
    ``lam`` (array), ``chi`` (array of shape (2, n)), ``omega0`` (float),
    and ``crossings`` (list of lambda values).
    """
    plt = _pyplot()
    n = len(families)
    fig, axes = plt.subplots(n, 1, figsize=(7.0, 2.8 * n), squeeze=False, sharex=True)
    for ax, fam in zip(axes[:, 0], families):
        lam = np.asarray(fam["lam"])
        chi = np.asarray(fam["chi"])
        for b in range(chi.shape[0]):
            ax.plot(lam / np.pi, chi[b] / fam["omega0"], ".", ms=2.0,
                    label=f"branch {b + 1}")
        for x in fam["crossings"]:
            ax.axvline(x / np.pi, color="0.6", lw=0.8, ls="--")
        ax.set_ylabel(r"$\tilde\chi/\omega_0$")
        ax.set_title(f"drive/level ratio {fam['ratio']:g}", fontsize=10)
        ax.legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel(r"$\lambda/\pi$")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def convergence_figure(path, kick_counts, phase_errors, deficits) -> Path:
    """Log-log convergence of the adiabatic prediction against exact evolution."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    kc = np.asarray(kick_counts, dtype=float)
    ax.loglog(kc, np.maximum(np.abs(phase_errors), 1e-18), "o-", label="phase error (rad)")
    ax.loglog(kc, np.maximum(np.abs(deficits), 1e-18), "s-", label="|fidelity deficit|")
    ax.set_xlabel("drive periods in the loop")
    ax.set_ylabel("deviation from exact evolution")
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def residual_figure(path, labels, values) -> Path:
    """Bar chart of gluing/cocycle residual magnitudes on a log axis."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    vals = np.maximum(np.abs(np.asarray(values, dtype=float)), 1e-18)
    pos = np.arange(len(labels))
    ax.bar(pos, vals, color="#4878a8")
    ax.set_yscale("log")
    ax.set_xticks(pos)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("max residual")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
