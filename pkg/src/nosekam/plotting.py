"""Figure output for the CLI report paths (files only, no interactive backends)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps SVG output byte-identical between runs
_SVG_META = {"Date": None, "Creator": None}
plt.rcParams["svg.hashsalt"] = "nosekam"


def _save(fig, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = _SVG_META if path.suffix == ".svg" else {}
    fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def section_scatter(sections, verdicts: Sequence[str], path, title: str = "") -> Path:
    """Combined section plot: ``x = w1 mod 1``, ``y = W1``, coloured by verdict."""
    colors = {"quasiperiodic": "tab:blue", "resonant": "tab:orange",
              "irregular": "tab:red", "escaped": "tab:gray"}
    fig, ax = plt.subplots(figsize=(6, 4.5))
    seen = set()
    for sec, v in zip(sections, verdicts):
        if sec is None or len(sec) == 0:
            continue
        n = (sec.points.shape[1] - 2) // 2
        label = v if v not in seen else None
        seen.add(v)
        ax.scatter(np.mod(sec.points[:, 0], 1.0), sec.points[:, n], s=0.3, color=colors[v],
                   label=label, rasterized=False)
    ax.set_xlabel("w1 mod 1")
    ax.set_ylabel("W1")
    ax.set_xlim(0, 1)
    if title:
        ax.set_title(title)
    if seen:
        ax.legend(markerscale=10, fontsize=8, loc="upper right")
    return _save(fig, path)


def orbit_plot(t, columns: dict[str, np.ndarray], path, energy=None) -> Path:
    """State components against time, with the energy error in a second panel."""
    rows = 2 if energy is not None else 1
    fig, axes = plt.subplots(rows, 1, figsize=(7, 2.6 * rows), sharex=True, squeeze=False)
    ax = axes[0, 0]
    for name, vals in columns.items():
        ax.plot(t, vals, lw=0.8, label=name)
    ax.legend(fontsize=8, ncol=4)
    if energy is not None:
        axes[1, 0].plot(t, energy - energy[0], lw=0.8, color="k")
        axes[1, 0].set_ylabel("E(t) - E(0)")
    axes[-1, 0].set_xlabel("t")
    return _save(fig, path)


def scan_plot(rho, columns: dict[str, np.ndarray], path) -> Path:
    """Determinants along ``J = rho C``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in columns.items():
        ax.plot(rho, vals, lw=1.0, label=name)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("rho")
    ax.set_ylabel("determinant")
    ax.legend(fontsize=7)
    return _save(fig, path)


def fraction_plot(betas, fractions, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    b = np.asarray(betas, dtype=float)
    x = np.where(b > 0, b, np.nan)
    ax.semilogx(x, fractions, "o-")
    for bi, fi in zip(b, fractions):
        if bi == 0:
            ax.axhline(fi, ls=":", color="gray", label=f"beta=0: {fi:.3f}")
            ax.legend(fontsize=8)
    ax.set_xlabel("beta")
    ax.set_ylabel("torus fraction")
    ax.set_ylim(-0.02, 1.02)
    return _save(fig, path)
