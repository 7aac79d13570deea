"""Quick-look figure rendering for single samples.

Writes a multi-panel PNG next to the sample artifacts: the rendered B-scan,
the five-class mask overlay, and the four color-mapped coefficient maps.
Figures are for offline inspection, not interactive steering; bytes are
deterministic for identical inputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap

from .pipeline import SampleRecord

# background + five corneal layers
_MASK_COLORS = ListedColormap([
    "#00000000", "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
])

_SAVEFIG_KW = {"dpi": 110, "metadata": {"Software": None}}


def render_preview(record: SampleRecord, out_path: Path) -> Path:
    """Write the side-by-side panel figure; returns the written path."""
    out_path = Path(out_path)
    fig, axes = plt.subplots(2, 3, figsize=(13.5, 8.0))
    fig.suptitle(
        f"sample {record.sample_id} ({record.phenotype}), "
        f"seed {record.meta['seeds']['sample']:#x}",
        fontsize=11,
    )

    ax = axes[0, 0]
    ax.imshow(record.image, cmap="gray", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_title("rendered B-scan")

    ax = axes[0, 1]
    ax.imshow(record.image, cmap="gray", vmin=0.0, vmax=1.0, aspect="auto")
    overlay = np.ma.masked_equal(record.mask5, 0)
    ax.imshow(overlay, cmap=_MASK_COLORS, vmin=0, vmax=5, alpha=0.45, aspect="auto")
    ax.set_title("five-layer mask overlay")

    panels = [
        ("refractive index n", record.coefficients.n, "viridis"),
        ("absorption mu_a (1/cm)", record.coefficients.mu_a, "magma"),
        ("scattering mu_s (1/cm)", record.coefficients.mu_s, "magma"),
        ("anisotropy g", record.coefficients.g, "cividis"),
    ]
    for ax, (title, grid, cmap) in zip(
            [axes[0, 2], axes[1, 0], axes[1, 1], axes[1, 2]], panels):
        im = ax.imshow(grid, cmap=cmap, aspect="auto")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, fraction=0.046)

    for ax in axes.flat:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    fig.savefig(out_path, **_SAVEFIG_KW)
    plt.close(fig)
    return out_path
