"""SVG plots and their backing CSV files."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from mgl import homotopy, tables, variation
from mgl.homotopy import HomotopyTrace
from mgl.variation import AreaDerivatives


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "mgl"
    matplotlib.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _writable_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"cannot write to {path}")
    return path


def default_nodes(trace: HomotopyTrace, count: int = 1) -> list[tuple[int, int]]:
    """Interior nodes with the largest midpoint lambda_1^2, row-major tie order."""
    mid = len(trace) // 2
    vals = np.where(trace.domain.interior, trace.spectra[mid][..., 0], -np.inf)
    order = np.argsort(-vals.ravel(), kind="stable")[:count]
    return [tuple(int(v) for v in np.unravel_index(k, vals.shape)) for k in order]


def plot_trace(trace: HomotopyTrace, out_dir, nodes=None) -> list[Path]:
    """One SVG per node (lambda^2(t) against the mu(t) envelope) plus the trace CSV."""
    if len(trace) == 0 or not trace.domain.active.any():
        raise ValueError("empty trace: nothing to plot")
    nodes = default_nodes(trace) if nodes is None else [tuple(n) for n in nodes]
    ny, nx = trace.domain.shape
    for j, i in nodes:
        if not (0 <= j < ny and 0 <= i < nx) or not trace.domain.active[j, i]:
            raise ValueError(f"node {(j, i)} is not active")
    out_dir = _writable_dir(out_dir)
    plt = _pyplot()
    mu = homotopy.InterpolantMu(0.0, 1.0, trace.spectra[0], trace.spectra[-1])
    ts = trace.t_samples
    written = []
    for j, i in nodes:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for k in range(trace.m):
            ax.plot(ts, trace.spectra[:, j, i, k], label=f"lambda_{k + 1}^2")
            ax.plot(ts, [mu(t)[j, i, k] for t in ts], "--", label=f"mu_{k + 1}")
        ax.set_xlabel("t")
        ax.set_title(f"node (i={i}, j={j})")
        ax.legend(fontsize=7)
        path = out_dir / f"spectrum_node_{i}_{j}.svg"
        _save(fig, path)
        plt.close(fig)
        written.append(path)
    written.append(homotopy.export_trace_csv(trace, out_dir / "trace.csv"))
    return written


def plot_variation(deriv: AreaDerivatives, out_dir) -> list[Path]:
    """A(t) plot, stacked second-variation terms with the finite-difference overlay, CSV."""
    if not deriv.reports:
        raise ValueError("empty variation report: nothing to plot")
    out_dir = _writable_dir(out_dir)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(deriv.t, deriv.area)
    ax.set_xlabel("t")
    ax.set_ylabel("A(t)")
    p_area = out_dir / "area.svg"
    _save(fig, p_area)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    terms = np.array([[getattr(r, n) for r in deriv.reports] for n in variation.TERM_NAMES])
    pos = np.clip(terms, 0, None)
    neg = np.clip(terms, None, 0)
    ax.stackplot(deriv.t, pos, labels=[n.replace("term_", "(") + ")" for n in variation.TERM_NAMES])
    ax.stackplot(deriv.t, neg)
    ax.plot(deriv.t, deriv.second_fd, "k.", label="finite difference")
    ax.set_xlabel("t")
    ax.set_ylabel("d2A/dt2")
    ax.legend(fontsize=7)
    p_terms = out_dir / "terms.svg"
    _save(fig, p_terms)
    plt.close(fig)
    p_csv = variation.export_variation_csv(deriv, out_dir / "variation.csv")
    return [p_area, p_terms, p_csv]


def emit_plots(obj, out_dir, nodes=None) -> list[Path]:
    if isinstance(obj, HomotopyTrace):
        return plot_trace(obj, out_dir, nodes)
    if isinstance(obj, AreaDerivatives):
        return plot_variation(obj, out_dir)
    raise TypeError(f"cannot plot {type(obj).__name__}")


__all__ = ["emit_plots", "plot_trace", "plot_variation", "tables"]
