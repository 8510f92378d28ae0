"""Figure rendering for the command-line report path.

Everything here draws to files through the Agg backend; the numerical layers
never import this module, so headless use of the library stays free of any
plotting dependency at import time.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _ordered_unique(values):
    out = []
    for v in values:
        if v not in out:
            out.append(v)
    return out


def sweep_figure(rows, path, title: str) -> None:
    """Critical-multiplier modulus over the sweep grid.

    Two-dimensional grids get one heatmap per system with the unit-modulus
    contour overlaid; degenerate grids (a single deviation or coupling value)
    fall back to line plots against the varying axis.
    """
    deltas = _ordered_unique(r["delta"] for r in rows)
    ks = _ordered_unique(r["K"] for r in rows)
    systems = _ordered_unique(r["system"] for r in rows)
    value = {}
    for r in rows:
        v = r["prmm_abs"] if r["converged"] else math.nan
        value[(r["delta"], r["K"], r["system"])] = v

    if len(deltas) > 1 and len(ks) > 1:
        fig, axes = plt.subplots(1, len(systems),
                                 figsize=(4.2 * len(systems), 3.6),
                                 sharey=True, squeeze=False)
        grids = []
        for name in systems:
            grids.append(np.array([[value[(d, k, name)] for k in ks]
                                   for d in deltas]))
        finite = np.concatenate([g[np.isfinite(g)] for g in grids])
        vmin = float(finite.min()) if finite.size else 0.0
        vmax = float(finite.max()) if finite.size else 1.0
        for ax, name, grid in zip(axes[0], systems, grids):
            mesh = ax.pcolormesh(ks, deltas, grid, shading="nearest",
                                 vmin=vmin, vmax=vmax, cmap="viridis")
            if np.isfinite(grid).all() and vmin < 1.0 < vmax:
                ax.contour(ks, deltas, grid, levels=[1.0], colors="w",
                           linewidths=1.0)
            ax.set_title(name)
            ax.set_xlabel("K")
        axes[0][0].set_ylabel("delta")
        fig.colorbar(mesh, ax=list(axes[0]), label="|critical multiplier|")
    else:
        axis, axis_vals = (("K", ks) if len(ks) > 1 else ("delta", deltas))
        fig, ax = plt.subplots(figsize=(5.2, 3.8))
        for name in systems:
            ys = []
            for v in axis_vals:
                key = (deltas[0], v, name) if axis == "K" else (v, ks[0], name)
                ys.append(value[key])
            ax.plot(axis_vals, ys, marker=".", label=name)
        ax.axhline(1.0, color="0.6", lw=0.8)
        ax.set_xlabel(axis)
        ax.set_ylabel("|critical multiplier|")
        ax.legend()
        fig.tight_layout()
    fig.suptitle(title, y=1.0)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def convergence_figure(rows, path) -> None:
    """Log-log error against coupling, fitted decay order in the legend."""
    groups = _ordered_unique((r["delta"], r["system"]) for r in rows)
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    for delta, name in groups:
        sel = [r for r in rows if r["delta"] == delta and r["system"] == name]
        ks = [r["K"] for r in sel]
        errs = [r["error"] for r in sel]
        ax.loglog(ks, errs, marker="o",
                  label=f"{name}, delta={delta:g}: slope {sel[0]['slope']:.2f}")
    ax.set_xlabel("K")
    ax.set_ylabel("phase velocity error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def trajectory_figure(header, matrix, path) -> None:
    """Time series panels; radii and phases split when both are present."""
    t = matrix[:, 0]
    r_cols = [i for i, h in enumerate(header) if h.startswith("R")]
    phi_cols = [i for i, h in enumerate(header) if h.startswith("phi")]
    n_panels = (1 if not r_cols else 2)
    fig, axes = plt.subplots(n_panels, 1, figsize=(6.0, 2.8 * n_panels),
                             sharex=True, squeeze=False)
    row = 0
    if r_cols:
        for i in r_cols:
            axes[row][0].plot(t, matrix[:, i], label=header[i])
        axes[row][0].set_ylabel("R")
        axes[row][0].legend(fontsize=8)
        row += 1
    for i in phi_cols:
        wrapped = np.mod(matrix[:, i], 2.0 * np.pi)
        axes[row][0].plot(t, wrapped, ".", ms=1.5, label=header[i])
    axes[row][0].set_ylabel("phase mod 2 pi")
    axes[row][0].set_xlabel("t")
    axes[row][0].legend(fontsize=8, markerscale=4)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
