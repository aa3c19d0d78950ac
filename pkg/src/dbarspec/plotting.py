"""
Optional figures written next to the CSV output.

matplotlib is imported lazily with the non-interactive Agg backend, so the
library and the CLI work without it unless ``--plot`` is requested.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Tuple

import numpy as np

from .grid import Field2D


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("plotting needs matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def plot_convergence(path: Path, m_sweep: Sequence[Tuple[int, float]], n_sweep: Sequence[Tuple[int, float]]) -> Path:
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.semilogy([m for m, _ in m_sweep], [e for _, e in m_sweep], "o-")
    ax1.set_xlabel("Taylor order M")
    ax1.set_ylabel("max error")
    ax2.semilogy([np.log2(n) for n, _ in n_sweep], [e for _, e in n_sweep], "o-")
    ax2.set_xlabel("log2 n")
    return _finish(fig, path)


def plot_shift(path: Path, rows) -> Path:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
    for ax, placement in zip(axes, ("mid", "edge")):
        sel = [r for r in rows if r.placement == placement]
        ns = [np.log2(r.n) for r in sel]
        ax.semilogy(ns, [r.err_unshifted for r in sel], "-", label="unshifted")
        ax.semilogy(ns, [r.err_shifted for r in sel], "*", label="shifted")
        ax.set_xlabel("log2 n")
        ax.set_title(f"support {placement}")
        ax.legend()
    axes[0].set_ylabel("max error")
    return _finish(fig, path)


def plot_roundtrip(path: Path, rows) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ns = [np.log2(r.n) for r in rows]
    ax.semilogy(ns, [r.error for r in rows], "o-", label="measured")
    ax.semilogy(ns, [r.published for r in rows], "x--", label="published")
    ax.set_xlabel("log2 n")
    ax.set_ylabel("max reconstruction error")
    ax.legend()
    return _finish(fig, path)


def plot_field(path: Path, field: Field2D, title: str = "") -> Path:
    plt = _pyplot()
    g = field.grid
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.pcolormesh(g.x, g.y, np.abs(field.values), shading="auto")
    fig.colorbar(im, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    return _finish(fig, path)


def plot_diagnostics(path: Path, t: Sequence[float], l2: Sequence[float], energy: Sequence[float]) -> Path:
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(t, np.asarray(l2) - l2[0])
    ax1.set_title("L2 norm change")
    ax2.plot(t, np.asarray(energy) - energy[0])
    ax2.set_title("energy change")
    for ax in (ax1, ax2):
        ax.set_xlabel("t")
    return _finish(fig, path)


__all__ = ["plot_convergence", "plot_diagnostics", "plot_field", "plot_roundtrip", "plot_shift"]
