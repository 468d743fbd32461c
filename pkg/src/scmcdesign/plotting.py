"""SVG figures of samples and designs.

Three-dimensional clouds are drawn as two projections, (x1, x2) and (x1, x3).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "svg.hashsalt": "scmcdesign",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _projections(dim: int):
    if dim == 1:
        return [(0, None)]
    if dim == 2:
        return [(0, 1)]
    return [(0, 1), (0, 2)]


def _axes(dim: int):
    pairs = _projections(dim)
    fig, axes = plt.subplots(1, len(pairs), figsize=(5.0 * len(pairs), 4.2), squeeze=False)
    return fig, axes[0], pairs


def _scatter(ax, pts, pair, **kw):
    i, j = pair
    y = np.zeros(len(pts)) if j is None else pts[:, j]
    ax.scatter(pts[:, i], y, **kw)
    ax.set_xlabel(f"x{i + 1}")
    ax.set_ylabel("" if j is None else f"x{j + 1}")


def _outline(ax, region, pair):
    pset = region.metadata.get("polygons") if region is not None else None
    if pset is None or pair != (0, 1):
        return
    for ring in pset.rings:
        ax.plot(ring[:, 0], ring[:, 1], color="0.4", lw=0.5)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_sample(points, path, region=None, title: str = "") -> None:
    pts = np.atleast_2d(points)
    n = len(pts)
    size = 4.0 if n <= 2_000 else 0.6
    with plt.rc_context(_RC):
        fig, axes, pairs = _axes(pts.shape[1])
        for ax, pair in zip(axes, pairs):
            _outline(ax, region, pair)
            _scatter(ax, pts, pair, s=size, c="tab:blue", alpha=0.5, linewidths=0, rasterized=False)
            ax.set_aspect("equal", adjustable="datalim")
        if title:
            fig.suptitle(title)
        _save(fig, path)


def plot_design(sample, design_points, path, region=None, infeasible=None, title: str = "") -> None:
    """Design points over a faded sample; infeasible points as orange crosses."""
    sample = np.atleast_2d(sample)
    dp = np.atleast_2d(design_points)
    bad = np.zeros(len(dp), dtype=bool) if infeasible is None else np.asarray(infeasible, dtype=bool)
    with plt.rc_context(_RC):
        fig, axes, pairs = _axes(sample.shape[1])
        for ax, pair in zip(axes, pairs):
            _outline(ax, region, pair)
            _scatter(ax, sample, pair, s=0.5, c="0.75", linewidths=0)
            if (~bad).any():
                _scatter(ax, dp[~bad], pair, s=18, c="tab:red", edgecolors="k", linewidths=0.4)
            if bad.any():
                _scatter(ax, dp[bad], pair, s=30, c="tab:orange", marker="x", linewidths=1.2)
            ax.set_aspect("equal", adjustable="datalim")
        if title:
            fig.suptitle(title)
        _save(fig, path)


def plot_deviation_histogram(deviations, path, title: str = "") -> None:
    dev = np.asarray(deviations, dtype=float).ravel()
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        ax.hist(dev, bins=50, color="tab:blue")
        ax.set_xlabel("deviation")
        ax.set_ylabel("count")
        if title:
            ax.set_title(title)
        _save(fig, path)
