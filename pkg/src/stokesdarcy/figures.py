"""Figure rendering for exported fields.

The export path writes PNGs next to the delimited output: speed and
pressure maps over both subdomains, a velocity quiver, and pointwise
error maps when an exact solution is available.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .export import ExportData


def _grids(reg):
    shape = (reg.ny, reg.nx)
    return (reg.x.reshape(shape), reg.y.reshape(shape))


def _panel(ax, reg_list, values, title):
    vmin = min(v.min() for v in values)
    vmax = max(v.max() for v in values)
    for reg, v in zip(reg_list, values):
        xx, yy = _grids(reg)
        m = ax.pcolormesh(xx, yy, v.reshape(xx.shape), shading="gouraud",
                          vmin=vmin, vmax=vmax, cmap="viridis")
    ax.set_title(title)
    ax.set_aspect("equal")
    return m


def render_figures(data: ExportData, stem: str) -> list[str]:
    """Render field maps (plus errors, when available) and a quiver; returns
    the written paths."""
    paths = []
    regions = data.regions

    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2), constrained_layout=True)
    speed = [np.hypot(r.u[:, 0], r.u[:, 1]) for r in regions]
    m0 = _panel(axes[0], regions, speed, "speed")
    fig.colorbar(m0, ax=axes[0], shrink=0.85)
    m1 = _panel(axes[1], regions, [r.p for r in regions], "pressure")
    fig.colorbar(m1, ax=axes[1], shrink=0.85)
    fig.suptitle(data.spec_name)
    path = f"{stem}_fields.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(5.2, 5.2), constrained_layout=True)
    for reg in regions:
        k = max(1, reg.nx // 24)
        xx, yy = _grids(reg)
        uu = reg.u[:, 0].reshape(xx.shape)
        vv = reg.u[:, 1].reshape(xx.shape)
        ax.quiver(xx[::k, ::k], yy[::k, ::k], uu[::k, ::k], vv[::k, ::k],
                  np.hypot(uu, vv)[::k, ::k], cmap="plasma", scale_units="xy")
    ax.set_title(f"{data.spec_name} velocity")
    ax.set_aspect("equal")
    path = f"{stem}_velocity.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    if data.has_exact:
        fig, axes = plt.subplots(1, 2, figsize=(10, 4.2), constrained_layout=True)
        uerr = [np.hypot(r.u[:, 0] - r.exact_u[:, 0], r.u[:, 1] - r.exact_u[:, 1])
                for r in regions]
        perr = [np.abs(r.p - r.exact_p) for r in regions]
        m0 = _panel(axes[0], regions, uerr, "|velocity error|")
        fig.colorbar(m0, ax=axes[0], shrink=0.85)
        m1 = _panel(axes[1], regions, perr, "|pressure error|")
        fig.colorbar(m1, ax=axes[1], shrink=0.85)
        fig.suptitle(f"{data.spec_name} pointwise errors")
        path = f"{stem}_errors.png"
        fig.savefig(path, dpi=130)
        plt.close(fig)
        paths.append(path)

    return paths


def render_history(iterations, totals, path: str) -> str:
    """Loss-vs-iteration curve for a training run."""
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    ax.semilogy(iterations, totals, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("total loss")
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
