"""Figure rendering for CLI reports.

Every report path can drop a PNG next to its JSON/CSV outputs; the figures
are deliberately plain (one panel, annotated axes) and are rendered with the
non-interactive Agg backend so they work in batch runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.0, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def _new_axes():
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
    return fig, ax


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def rank_profile_figure(path, before, after=None, reference=None, title=""):
    """Step plot of per-cut unfolding ranks, optionally comparing two bases."""
    fig, ax = _new_axes()
    cuts = np.arange(1, len(before) + 1)
    ax.step(cuts, before, where="mid", marker="o", label="input basis")
    if after is not None:
        ax.step(cuts, after, where="mid", marker="s", label="pair basis")
    if reference is not None:
        ax.step(
            np.arange(1, len(reference) + 1),
            reference,
            where="mid",
            linestyle="--",
            color="gray",
            label="minimal profile",
        )
    ax.set_xlabel("cut position k")
    ax.set_ylabel("unfolding rank")
    ax.set_xticks(cuts)
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def energy_levels_figure(path, report, title=""):
    """Method energies against the dense reference, per level."""
    fig, ax = _new_axes()
    idx = [lvl.index for lvl in report.levels]
    fci = [lvl.fci_energy for lvl in report.levels]
    method = [lvl.energy for lvl in report.levels]
    ax.plot(idx, fci, "o-", label="dense reference")
    ax.plot(idx, method, "s--", label=report.method)
    ax.set_xlabel("level")
    ax.set_ylabel("energy")
    ax.set_xticks(idx)
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def scan_figure(path, scan_rows, fci_energy, title=""):
    """Ground energy against the uniform bond-dimension cap."""
    fig, ax = _new_axes()
    dims = [row["bond_dim"] for row in scan_rows]
    energies = [row["energy"] for row in scan_rows]
    ax.plot(dims, energies, "o-", label="mode-optimized energy")
    ax.axhline(fci_energy, color="gray", linestyle="--", label="dense reference")
    ax.set_xlabel("bond-dimension cap")
    ax.set_ylabel("energy")
    ax.set_xticks(dims)
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def tail_decay_figure(path, rows, title=""):
    """Semilog decay of the truncation error against the chain length."""
    fig, ax = _new_axes()
    lengths = [row["L"] for row in rows]
    measured = [max(row["tail_norm_sq"], 1e-300) for row in rows]
    analytic = [max(row["analytic_tail_sq"], 1e-300) for row in rows]
    ax.semilogy(lengths, measured, "o", label="measured")
    ax.semilogy(lengths, analytic, "--", label="analytic tail")
    ax.set_xlabel("truncation length L")
    ax.set_ylabel("squared truncation error")
    ax.set_xticks(lengths)
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)
