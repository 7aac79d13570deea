"""Layer optical constants and pixel-aligned ground-truth maps.

Transport-facing lengths are centimeters; geometry curves arrive in
micrometers and are converted exactly once (1 µm = 1e-4 cm).  Labels use the
fixed anatomical code 1..7 = air, epithelium, Bowman, stroma, Descemet,
endothelium, vitreous; the five corneal tissue classes are codes 2..6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import NUM_INTERVALS, BoundarySet

UM_TO_CM = 1.0e-4

LAYER_NAMES = (
    "air", "epithelium", "bowman", "stroma", "descemet", "endothelium", "vitreous",
)

COEFFICIENT_NAMES = ("n", "mu_a", "mu_s", "g")


class OpticsError(ValueError):
    pass


@dataclass(frozen=True)
class LayerOptics:
    """Optical constants of one homogeneous layer (lengths in cm)."""

    name: str
    n: float       # refractive index
    mu_a: float    # absorption coefficient, 1/cm
    mu_s: float    # scattering coefficient, 1/cm
    g: float       # scattering anisotropy
    d: float       # nominal average thickness, cm

    def validate(self) -> None:
        if self.n < 1.0:
            raise OpticsError(f"{self.name}: refractive index below 1")
        if self.mu_a < 0 or self.mu_s < 0:
            raise OpticsError(f"{self.name}: negative coefficient")
        if not -1.0 <= self.g <= 1.0:
            raise OpticsError(f"{self.name}: anisotropy outside [-1, 1]")
        if self.d <= 0:
            raise OpticsError(f"{self.name}: non-positive thickness")


@dataclass(frozen=True)
class OpticsTable:
    """Ordered optical constants for the seven stacked intervals."""

    layers: tuple

    def validate(self) -> None:
        if len(self.layers) != NUM_INTERVALS:
            raise OpticsError(f"expected {NUM_INTERVALS} layers, got {len(self.layers)}")
        for layer, expected in zip(self.layers, LAYER_NAMES):
            layer.validate()
            if layer.name != expected:
                raise OpticsError(f"layer order broken: {layer.name} != {expected}")

    def column(self, attr: str) -> np.ndarray:
        return np.array([getattr(layer, attr) for layer in self.layers], dtype=np.float64)

    def nominal_thickness_um(self) -> np.ndarray:
        return self.column("d") / UM_TO_CM

    def as_rows(self) -> list[str]:
        """Canonical one-line-per-layer rendering (shortest round-trip floats)."""
        return [
            f"{layer.name} n={layer.n!r} mu_a={layer.mu_a!r} mu_s={layer.mu_s!r} "
            f"g={layer.g!r} d={layer.d!r}"
            for layer in self.layers
        ]

    def to_dict(self) -> dict:
        return {
            layer.name: {"n": layer.n, "mu_a": layer.mu_a, "mu_s": layer.mu_s,
                         "g": layer.g, "d": layer.d}
            for layer in self.layers
        }


def default_optics_table() -> OpticsTable:
    """Literature-based constants for the five corneal layers plus air and vitreous."""
    table = OpticsTable(layers=(
        LayerOptics("air",         1.000, 0.00,  0.00, 0.00, 0.0262),
        LayerOptics("epithelium",  1.400, 0.20, 10.00, 0.92, 0.0052),
        LayerOptics("bowman",      1.400, 0.20,  8.00, 0.92, 8.3612e-04),
        LayerOptics("stroma",      1.376, 0.20,  4.50, 0.94, 0.0489),
        LayerOptics("descemet",    1.375, 0.30,  8.00, 0.93, 0.0011),
        LayerOptics("endothelium", 1.375, 0.30, 10.00, 0.93, 4.4537e-04),
        LayerOptics("vitreous",    1.336, 0.06,  0.02, 0.93, 0.0124),
    ))
    table.validate()
    return table


def thickness_map(b: BoundarySet) -> np.ndarray:
    """Per-column interval thicknesses in cm, shape (7, W).

    Row k is the adjacent boundary difference y[k+1] - y[k]; per column the
    rows sum to the axial window depth.
    """
    diffs = np.diff(b.boundaries, axis=0)
    if np.any(diffs <= 0):
        raise OpticsError("boundary ordering violated; thicknesses would be non-positive")
    return diffs * UM_TO_CM


@dataclass
class CoefficientMaps:
    """Pixel-wise optical constants, each grid shaped like the label map."""

    n: np.ndarray
    mu_a: np.ndarray
    mu_s: np.ndarray
    g: np.ndarray

    def as_dict(self) -> dict:
        return {"n": self.n, "mu_a": self.mu_a, "mu_s": self.mu_s, "g": self.g}


def rasterize_labels(b: BoundarySet, width: int, height: int) -> np.ndarray:
    """Pixel-center layer labels over the calibrated window, shape (H, W).

    A pixel row center z gets code 1 + (number of tissue interfaces at or
    above z), i.e. half-open intervals where a center exactly on an interface
    belongs to the layer below it.
    """
    if b.width != width:
        raise OpticsError(f"label width {width} != boundary grid width {b.width}")
    z_top, z_bot = b.axial_range()
    pitch = (z_bot - z_top) / height
    z_centers = z_top + (np.arange(height, dtype=np.float64) + 0.5) * pitch

    labels = np.ones((height, width), dtype=np.uint8)
    for k in range(1, 7):  # six tissue interfaces y1..y6
        labels += (z_centers[:, None] >= b.boundaries[k][None, :]).astype(np.uint8)
    return labels


def project_coefficients(labels: np.ndarray, table: OpticsTable) -> CoefficientMaps:
    """Piecewise-constant lookup of the table row selected by each pixel's label."""
    if labels.min() < 1 or labels.max() > NUM_INTERVALS:
        raise OpticsError("labels outside 1..7")
    idx = labels.astype(np.intp) - 1
    return CoefficientMaps(
        n=table.column("n")[idx],
        mu_a=table.column("mu_a")[idx],
        mu_s=table.column("mu_s")[idx],
        g=table.column("g")[idx],
    )


def identify_labels(maps: CoefficientMaps, table: OpticsTable) -> np.ndarray:
    """Recover the label grid by matching each pixel's 4-tuple against the table.

    Raises if any pixel matches no row or several rows; table rows are
    pairwise distinct as 4-tuples so this inverts project_coefficients.
    """
    recovered = np.zeros(maps.n.shape, dtype=np.uint8)
    matches = np.zeros(maps.n.shape, dtype=np.uint8)
    cast = maps.n.dtype.type  # stored maps may be float32; match in their precision
    for code, layer in enumerate(table.layers, start=1):
        hit = (
            (maps.n == cast(layer.n)) & (maps.mu_a == cast(layer.mu_a))
            & (maps.mu_s == cast(layer.mu_s)) & (maps.g == cast(layer.g))
        )
        recovered[hit] = code
        matches += hit.astype(np.uint8)
    if np.any(matches != 1):
        bad = int(np.count_nonzero(matches != 1))
        raise OpticsError(f"{bad} pixels did not match exactly one table row")
    return recovered


def corneal_mask(labels: np.ndarray) -> np.ndarray:
    """Five-class tissue mask: 0 for air/vitreous, 1..5 for the corneal layers."""
    mask = labels.astype(np.int16) - 1
    mask[(labels == 1) | (labels == 7)] = 0
    return mask.astype(np.uint8)
