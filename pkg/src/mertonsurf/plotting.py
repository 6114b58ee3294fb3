"""Heatmap rendering for calibrated surfaces.

Figures are written as self-contained SVG (fonts converted to paths, no
external references) so a report directory can be archived whole. The
SVG hash salt is pinned and date metadata stripped to keep reruns
byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .surfaces import SurfaceGrid, SurfaceKind

plt.rcParams.update(
    {
        "figure.figsize": (7.0, 4.8),
        "font.size": 9,
        "axes.titlesize": 10,
        "svg.fonttype": "path",
        "svg.hashsalt": "mertonsurf",
    }
)

_VALUE_LABELS = {
    SurfaceKind.ASSET_VOL: "implied asset volatility (annualized)",
    SurfaceKind.EQUITY_VOL: "implied equity volatility (annualized)",
    SurfaceKind.DRIFT: "implied drift (annualized)",
    SurfaceKind.UP_PROB: "implied up-move probability",
    SurfaceKind.DOWNSIDE_PROB: "implied downside probability",
    SurfaceKind.DIFF: "volatility difference",
    SurfaceKind.REL_DIFF: "relative volatility difference",
}

_ASSET_KINDS = {
    SurfaceKind.ASSET_VOL,
    SurfaceKind.DRIFT,
    SurfaceKind.UP_PROB,
    SurfaceKind.DOWNSIDE_PROB,
}


def _moneyness_label(kind: SurfaceKind) -> str:
    if kind in _ASSET_KINDS:
        return "moneyness (strike / asset value)"
    return "moneyness (strike / spot)"


def render_heatmap(
    surface: SurfaceGrid,
    path: str | Path,
    metadata: dict[str, str] | None = None,
) -> Path:
    """Render the surface as an SVG heatmap with a value color bar.

    Flagged or unset cells are drawn in a neutral hatch color and
    excluded from the color scaling.
    """
    path = Path(path)
    values = np.array(surface.values, dtype=float)
    masked = np.ma.masked_invalid(values)
    for i, row in enumerate(surface.flags):
        for j, cell_flags in enumerate(row):
            if cell_flags:
                masked[i, j] = np.ma.masked

    fig, ax = plt.subplots()
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("#d0d0d0")
    # pcolormesh needs cell edges; pad the axes out by half a step
    m = surface.moneyness
    t = surface.maturity_days.astype(float)
    m_edges = _edges(m)
    t_edges = _edges(t)
    mesh = ax.pcolormesh(m_edges, t_edges, masked, cmap=cmap, shading="flat")
    ax.set_xlabel(_moneyness_label(surface.kind))
    ax.set_ylabel("maturity (days)")
    title = _VALUE_LABELS.get(surface.kind, surface.kind.value)
    as_of = (metadata or {}).get("as_of") or surface.metadata.get("as_of")
    if as_of:
        title = f"{title} ({as_of})"
    ax.set_title(title)
    colorbar = fig.colorbar(mesh, ax=ax)
    colorbar.set_label(_VALUE_LABELS.get(surface.kind, "value"))
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _edges(centers: np.ndarray) -> np.ndarray:
    centers = np.asarray(centers, dtype=float)
    if centers.size == 1:
        half = 0.5 if centers[0] == 0 else abs(centers[0]) * 0.05 + 0.5
        return np.array([centers[0] - half, centers[0] + half])
    mid = 0.5 * (centers[1:] + centers[:-1])
    first = centers[0] - (mid[0] - centers[0])
    last = centers[-1] + (centers[-1] - mid[-1])
    return np.concatenate([[first], mid, [last]])
