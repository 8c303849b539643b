"""Optional figure rendering for CLI outputs.

Figures are a convenience layer on top of the CSV files, which stay the
canonical record; everything here is reachable only through the --plot
flag.  The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, out, name):
    path = os.path.join(out, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_descent(trace, points, out):
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    ax0.semilogy(trace.energy, label="energy")
    ax0.semilogy(trace.grad_norm, label="gradient norm")
    ax0.set_xlabel("iteration")
    ax0.legend()
    ax0.set_title(f"descent ({trace.stop_reason})")
    if points.shape[1] == 2:
        ax1.scatter(points[:, 0], points[:, 1], s=8, c="crimson")
        ax1.set_aspect("equal")
    ax1.set_title("final cloud")
    return _save(fig, out, "descent.png")


def plot_curve(curve, out):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(curve.ts, curve.values)
    ax.axvline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("SW$_2^2$")
    ax.set_title(curve.mode)
    return _save(fig, out, "curve.png")


def plot_residuals(norms, out):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(norms, marker=".", ls="none")
    ax.set_xlabel("particle")
    ax.set_ylabel("residual norm")
    return _save(fig, out, "residuals.png")


def plot_sweep(results, out):
    fig, ax = plt.subplots(figsize=(6, 4))
    for m, _, trace in results:
        ax.semilogy(trace.energy, label=f"step {m}N")
    ax.set_xlabel("iteration")
    ax.set_ylabel("energy")
    ax.legend()
    return _save(fig, out, "sweep.png")


def plot_cells(descriptor, out):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.stem(descriptor.hessian_eigenvalues)
    ax.set_ylabel("Hessian block eigenvalues")
    ax.set_title("strictly convex" if descriptor.strictly_convex
                 else "degenerate cell")
    return _save(fig, out, "cell.png")
