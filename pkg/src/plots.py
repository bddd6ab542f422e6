"""Static SVG figures: residual variances, barcodes and embedding views."""

from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .mds import Embedding, ResidualProfile  # noqa: E402
from .schemas import Barcode  # noqa: E402

# Fixed ids and no date stamp keep the SVG output reproducible
matplotlib.rcParams["svg.hashsalt"] = "contagion-maps"
SVG_METADATA = {"Date": None}
DIM_COLOURS = ["tab:blue", "tab:orange", "tab:green"]


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata=SVG_METADATA)
    plt.close(fig)
    return path


def residual_svg(path: Path, profile: ResidualProfile, title: str = "") -> Path:
    points = profile.plotted()
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot([p for p, _ in points], [r for _, r in points], marker="o")
    ax.axhline(profile.criterion, color="grey", linestyle=":", linewidth=1)
    ax.set_xlabel("dimension p")
    ax.set_ylabel("residual variance")
    ax.set_ylim(0, 1.05)
    ax.set_title(title or f"P = {profile.dimension}")
    return _save(fig, path)


def barcode_svg(path: Path, barcode: Barcode, title: str = "") -> Path:
    """One horizontal bar per interval, grouped by dimension."""
    finite = [i.death for i in barcode.intervals if not i.is_infinite]
    right = max(finite + [i.birth for i in barcode.intervals] + [1e-12]) * 1.1
    fig, ax = plt.subplots(figsize=(5, 3))
    row = 0
    for dim in range(barcode.max_dim + 1):
        for interval in barcode.in_dim(dim):
            end = right if interval.is_infinite else interval.death
            ax.hlines(row, interval.birth, end, color=DIM_COLOURS[dim % len(DIM_COLOURS)], linewidth=1.5)
            row += 1
    for dim in range(barcode.max_dim + 1):
        ax.plot([], [], color=DIM_COLOURS[dim % len(DIM_COLOURS)], label=f"H{dim}")
    ax.set_yticks([])
    ax.set_xlim(0, right)
    ax.set_xlabel("filtration value")
    ax.legend(loc="lower right", fontsize="small")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def embedding_svg(path: Path, embedding: Embedding, colour: Optional[np.ndarray] = None, title: str = "") -> Path:
    """Orthographic 2-D views of the first three coordinates."""
    coords = embedding.coordinates
    if coords.shape[1] < 3:
        coords = np.hstack([coords, np.zeros((coords.shape[0], 3 - coords.shape[1]))])
    views = [(0, 1), (0, 2), (1, 2)]
    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    for ax, (a, b) in zip(axes, views):
        if colour is None:
            ax.scatter(coords[:, a], coords[:, b], s=4)
        else:
            ax.scatter(coords[:, a], coords[:, b], c=colour, s=4, cmap="viridis")
        ax.set_xlabel(f"y{a + 1}")
        ax.set_ylabel(f"y{b + 1}")
        ax.set_aspect("equal", adjustable="datalim")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def write_svg_plots(
    out_dir: Path,
    stem: str,
    profile: Optional[ResidualProfile] = None,
    barcode: Optional[Barcode] = None,
    embedding: Optional[Embedding] = None,
    colour: Optional[np.ndarray] = None,
) -> List[Path]:
    """Write whichever figures the given results allow; returns their paths."""
    out_dir = Path(out_dir)
    written = []
    if profile is not None:
        written.append(residual_svg(out_dir / f"{stem}_residuals.svg", profile, stem))
    if barcode is not None:
        written.append(barcode_svg(out_dir / f"{stem}_barcode.svg", barcode, stem))
    if embedding is not None:
        written.append(embedding_svg(out_dir / f"{stem}_embedding.svg", embedding, colour, stem))
    return written
