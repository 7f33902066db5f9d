"""Report writers: delimited outputs plus rendered figures.

Every CLI command funnels its results through here. CSV/JSON files are the
deterministic record; alongside them the report path renders matplotlib
figures (Agg backend) so a run leaves plot files next to the data.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Optional, Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .catalogue import CatalogueEntry, OracleResult  # noqa: E402
from .integrators import Trajectory  # noqa: E402

__all__ = [
    "write_json",
    "write_csv",
    "write_trajectory_csv",
    "write_catalogue",
    "write_oracle_report",
    "plot_trajectories",
    "plot_reduction_profile",
    "plot_census",
]


def write_json(path: str, payload) -> str:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_trajectory_csv(
    path: str, traj: Trajectory, names: Sequence[str],
    sample_times: Optional[Sequence[float]] = None,
) -> str:
    """Trajectory table `t,<state names...>` (dense-sampled if requested)."""
    if sample_times is not None:
        ts = np.asarray(sample_times, dtype=float)
        ys = traj.sample(ts)
    else:
        ts, ys = traj.times, traj.states
    rows = [[f"{t:.12g}"] + [f"{v:.12g}" for v in y] for t, y in zip(ts, ys)]
    return write_csv(path, ["t"] + list(names), rows)


def catalogue_rows(entries: Sequence[CatalogueEntry]):
    header = [
        "config", "label", "singular", "class", "form",
        "normally_hyperbolic", "branches", "relevant", "reason",
        "oracle", "oracle_verified",
    ]
    rows = []
    for e in entries:
        config = ";".join(f"{k}={v}" for k, v in e.config.items())
        branches = "|".join(f"{b.branch_id}:{b.verdict}" for b in e.branches)
        verified = "" if e.oracle_verified is None else int(e.oracle_verified)
        rows.append([
            config, e.label or "", int(e.singular), e.fiber_class, e.form,
            int(e.normally_hyperbolic), branches, int(e.relevant), e.reason,
            e.oracle, verified,
        ])
    return header, rows


def write_catalogue(path: str, entries: Sequence[CatalogueEntry],
                    fmt: str = "csv") -> str:
    header, rows = catalogue_rows(entries)
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        return write_json(path, payload)
    return write_csv(path, header, rows)


def write_oracle_report(path: str, results: Sequence[OracleResult],
                        fmt: str = "csv") -> str:
    header = ["row", "table", "label", "points", "max_rel_err", "passed"]
    rows = [
        [r.row_id, r.table, r.label, r.n_points, f"{r.max_rel_err:.3e}",
         int(r.passed)]
        for r in results
    ]
    if fmt == "json":
        return write_json(path, [dict(zip(header, row)) for row in rows])
    return write_csv(path, header, rows)


# ----------------------------------------------------------------------
# Figures
# ----------------------------------------------------------------------

def plot_trajectories(
    path: str,
    runs: Sequence[tuple[str, Trajectory, Sequence[str]]],
    components: Optional[Sequence[str]] = None,
    title: str = "",
    n_samples: int = 800,
) -> str:
    """Overlay labelled trajectory runs, one panel per plotted component."""
    wanted = list(components) if components else None
    panels = wanted or list(runs[0][2])
    fig, axes = plt.subplots(len(panels), 1, sharex=True,
                             figsize=(7.0, 2.1 * len(panels)), squeeze=False)
    for label, traj, names in runs:
        ts = np.linspace(traj.times[0], traj.times[-1], n_samples)
        ys = traj.sample(ts)
        for ax, comp in zip(axes[:, 0], panels):
            if comp not in names:
                continue
            ax.plot(ts, ys[:, list(names).index(comp)], label=label, lw=1.2)
    for ax, comp in zip(axes[:, 0], panels):
        ax.set_ylabel(comp)
        ax.legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("t")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_reduction_profile(
    path: str,
    grid: np.ndarray,
    psi0: np.ndarray,
    r_terms: np.ndarray,
    eigenvalues: np.ndarray,
    chart_name: str,
    title: str = "",
) -> str:
    """Manifold height, slow-field terms, and eigenvalue along the chart."""
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7.0, 6.5))
    axes[0].plot(grid, psi0, color="tab:blue")
    axes[0].set_ylabel("manifold height")
    for j in range(r_terms.shape[1]):
        axes[1].plot(grid, r_terms[:, j], label=f"R{j + 1}")
    axes[1].set_ylabel("slow-field terms")
    axes[1].legend(fontsize=8)
    axes[2].plot(grid, eigenvalues, color="tab:red")
    axes[2].axhline(0.0, color="k", lw=0.5)
    axes[2].set_ylabel("eigenvalue")
    axes[2].set_xlabel(chart_name)
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_census(path: str, entries: Sequence[CatalogueEntry], title: str = "") -> str:
    """Bar chart of singular configurations by fiber class and form."""
    classes: dict[str, int] = {}
    forms: dict[str, int] = {}
    for e in entries:
        if not e.singular:
            continue
        classes[e.fiber_class] = classes.get(e.fiber_class, 0) + 1
        forms[e.form] = forms.get(e.form, 0) + 1
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
    keys = sorted(classes)
    ax1.bar(keys, [classes[k] for k in keys], color="tab:blue")
    ax1.set_title("singular cases by fiber class")
    fkeys = sorted(forms)
    ax2.bar(fkeys, [forms[k] for k in fkeys], color="tab:orange")
    ax2.set_title("by manifold form")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
