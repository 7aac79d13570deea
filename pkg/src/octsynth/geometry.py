"""Randomized five-layer corneal boundary geometry.

Coordinates: lateral position x (micrometers, zero at the scan center) and
axial position y (micrometers, increasing downward, so the dome apex is the
smallest y).  A sample's geometry is an anterior surface built from a
circular baseline plus a sinusoidal-Gaussian deformation, stacked into eight
ordered boundary curves:

    y0 window top | y1 air/epithelium | y2 epithelium/Bowman
    y3 Bowman/stroma | y4 stroma/Descemet | y5 Descemet/endothelium
    y6 endothelium/vitreous | y7 window bottom

All operations are pure: identical inputs (including seeds) give bitwise
identical outputs, so geometry generation may run on any number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .streams import UniformStream

HEALTHY = "healthy"
KERATOCONUS = "keratoconus"
PHENOTYPES = (HEALTHY, KERATOCONUS)

#: boundary curves per set: window top + six tissue interfaces + window bottom
NUM_BOUNDARIES = 8
#: stacked intervals: air, epithelium, Bowman, stroma, Descemet, endothelium, vitreous
NUM_INTERVALS = 7

DAMPING_FACTOR = 0.5
MAX_DAMPING_ITERATIONS = 20


class GeometryError(ValueError):
    """Invalid geometry parameters or configuration."""


class UnsatisfiableGeometryError(GeometryError):
    """Constraints cannot be met even with the nominal (unperturbed) profiles."""


@dataclass(frozen=True)
class GeometryParams:
    """One sample's anterior-surface parameters, all lengths in micrometers."""

    radius: float            # baseline circular radius
    decenter: float          # lateral offset of the oscillatory terms
    amp_low: float           # low-frequency cosine amplitude
    amp_high: float          # high-frequency sine amplitude
    freq_low: float          # low-frequency multiplier (dimensionless)
    freq_high: float         # high-frequency multiplier (dimensionless)
    bulge_height: float      # Gaussian bulge height
    bulge_center: float      # Gaussian bulge center
    bulge_width: float       # Gaussian bulge standard deviation
    phenotype: str = HEALTHY
    seed: int = 0

    def validate(self) -> None:
        if self.radius <= 0:
            raise GeometryError(f"radius must be positive, got {self.radius}")
        if self.bulge_width <= 0:
            raise GeometryError(f"bulge_width must be positive, got {self.bulge_width}")
        if self.freq_low <= 0 or self.freq_high <= 0:
            raise GeometryError("frequency multipliers must be positive")
        if self.phenotype not in PHENOTYPES:
            raise GeometryError(f"unknown phenotype {self.phenotype!r}")

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "decenter": self.decenter,
            "amp_low": self.amp_low,
            "amp_high": self.amp_high,
            "freq_low": self.freq_low,
            "freq_high": self.freq_high,
            "bulge_height": self.bulge_height,
            "bulge_center": self.bulge_center,
            "bulge_width": self.bulge_width,
            "phenotype": self.phenotype,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SamplingRanges:
    """Closed intervals each GeometryParams field is drawn from.

    Defaults are configuration, not literature values; they are recorded in
    every sample's metadata and may be overridden per dataset.
    """

    radius: tuple = (7000.0, 9000.0)
    decenter: tuple = (-500.0, 500.0)
    amp_low: tuple = (0.0, 30.0)
    amp_high: tuple = (0.0, 30.0)
    freq_low: tuple = (0.5, 1.5)
    freq_high: tuple = (2.0, 5.0)
    bulge_height_healthy: tuple = (0.0, 5.0)
    bulge_height_keratoconus: tuple = (40.0, 120.0)
    bulge_center: tuple = (-1500.0, 1500.0)  # central third of the 9 mm window
    bulge_width: tuple = (300.0, 900.0)
    delta: float = 0.08  # thickness perturbation half-width

    _INTERVALS = (
        "radius", "decenter", "amp_low", "amp_high", "freq_low", "freq_high",
        "bulge_height_healthy", "bulge_height_keratoconus", "bulge_center",
        "bulge_width",
    )

    def validate(self) -> None:
        for name in self._INTERVALS:
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise GeometryError(f"invalid range {name}=({lo}, {hi})")
        if self.radius[0] <= 0:
            raise GeometryError("radius range must be positive")
        if self.freq_low[0] <= 0 or self.freq_high[0] <= 0:
            raise GeometryError("frequency ranges must be positive")
        if self.bulge_width[0] <= 0:
            raise GeometryError("bulge_width range must be positive")
        if not 0.0 <= self.delta <= 0.5:
            raise GeometryError(f"delta out of range: {self.delta}")

    def to_dict(self) -> dict:
        d = {name: list(getattr(self, name)) for name in self._INTERVALS}
        d["delta"] = self.delta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingRanges":
        kwargs = {}
        for key, value in d.items():
            if key == "delta":
                kwargs[key] = float(value)
            elif key in cls._INTERVALS:
                kwargs[key] = (float(value[0]), float(value[1]))
            else:
                raise GeometryError(f"unknown sampling range {key!r}")
        return cls(**kwargs)


@dataclass(frozen=True)
class ThicknessProfiles:
    """Nominal per-interval thickness profiles and their lower bounds (µm).

    nominal rows follow the interval order (air .. vitreous) and may be
    laterally uniform (shape (7,)) or per-column (shape (7, W)).
    """

    nominal: np.ndarray
    lower_bounds: np.ndarray

    def validate(self) -> None:
        nom = np.atleast_1d(np.asarray(self.nominal, dtype=np.float64))
        lb = np.asarray(self.lower_bounds, dtype=np.float64)
        if nom.shape[0] != NUM_INTERVALS or lb.shape[0] != NUM_INTERVALS:
            raise GeometryError("profiles must cover all seven intervals")
        if not np.all(nom > 0):
            raise GeometryError("nominal thicknesses must be positive")
        if not np.all(np.isfinite(nom)) or not np.all(np.isfinite(lb)):
            raise GeometryError("profiles must be finite")

    @classmethod
    def uniform(cls, nominal_um, bound_fraction: float = 0.2) -> "ThicknessProfiles":
        """Laterally uniform profiles with bounds at a fraction of nominal."""
        nom = np.asarray(nominal_um, dtype=np.float64)
        return cls(nominal=nom, lower_bounds=bound_fraction * nom)


@dataclass
class BoundarySet:
    """Eight ordered boundary curves over a lateral grid.

    thickness_scale is the multiplicative perturbation actually applied by
    stack_layers; axial_stretch and aspect record what calibrate_and_crop
    did (1.0 / None for native geometry).
    """

    x: np.ndarray                 # (W,) lateral positions, µm
    boundaries: np.ndarray        # (8, W) axial positions, µm, increasing downward
    thickness_scale: float = 1.0
    axial_stretch: float = 1.0
    aspect: float | None = None
    params: GeometryParams | None = field(default=None, repr=False)

    @property
    def width(self) -> int:
        return self.x.shape[0]

    def axial_range(self) -> tuple[float, float]:
        """Axial extent (top, bottom) spanned by the set, µm."""
        return float(self.boundaries[0].min()), float(self.boundaries[-1].max())

    def ordering_violations(self) -> int:
        """Number of grid columns where strict top-to-bottom ordering fails."""
        diffs = np.diff(self.boundaries, axis=0)
        return int(np.count_nonzero(np.any(diffs <= 0, axis=0)))

    def assert_ordered(self) -> None:
        bad = self.ordering_violations()
        if bad:
            raise GeometryError(f"boundary ordering violated at {bad} columns")
        if not np.all(np.isfinite(self.boundaries)):
            raise GeometryError("boundaries contain non-finite values")


def lateral_grid(span_um: float, columns: int) -> np.ndarray:
    """Column-center positions of a width-`columns` grid spanning span_um."""
    pitch = span_um / columns
    return (np.arange(columns) + 0.5) * pitch - span_um / 2.0


def baseline_profile(x: np.ndarray, radius: float) -> np.ndarray:
    """Circular dome support: 0 at the apex, increasing (deeper) toward the edges."""
    x = np.asarray(x, dtype=np.float64)
    if radius <= 0:
        raise GeometryError(f"radius must be positive, got {radius}")
    if np.any(np.abs(x) > radius):
        raise GeometryError("lateral grid extends beyond the baseline radius")
    return radius - np.sqrt(radius * radius - x * x)


def deformation(x: np.ndarray, p: GeometryParams) -> np.ndarray:
    """Sinusoidal-Gaussian axial offset added to the baseline dome.

    The two oscillatory terms model low/high frequency surface waviness,
    the Gaussian term a localized bulge; its magnitude is bounded by
    |amp_low| + |amp_high| + |bulge_height|.
    """
    p.validate()
    x = np.asarray(x, dtype=np.float64)
    phase = np.pi * (x + p.decenter) / p.radius
    gauss = np.exp(-((x - p.bulge_center) ** 2) / (2.0 * p.bulge_width**2))
    return (
        p.amp_low * np.cos(p.freq_low * phase)
        + p.amp_high * np.sin(p.freq_high * phase)
        + p.bulge_height * gauss
    )


def anterior_surface(x: np.ndarray, p: GeometryParams) -> np.ndarray:
    """Deformed air/epithelium interface: baseline dome plus deformation."""
    return baseline_profile(x, p.radius) + deformation(x, p)


# Fixed draw order; changing it would silently change every sampled dataset.
_DRAW_ORDER = (
    "radius", "decenter", "amp_low", "amp_high", "freq_low", "freq_high",
    "bulge_height", "bulge_center", "bulge_width",
)


def sample_geometry(ranges: SamplingRanges, seed: int, phenotype: str = HEALTHY) -> GeometryParams:
    """Draw one parameter set uniformly from the configured ranges.

    The draw is a pure function of (ranges, seed, phenotype); the phenotype
    selects which bulge-height band is used.
    """
    ranges.validate()
    if phenotype not in PHENOTYPES:
        raise GeometryError(f"unknown phenotype {phenotype!r}")
    stream = UniformStream(seed)
    values = {}
    for name in _DRAW_ORDER:
        if name == "bulge_height":
            band = (
                ranges.bulge_height_healthy
                if phenotype == HEALTHY
                else ranges.bulge_height_keratoconus
            )
            values[name] = stream.next_in(*band)
        else:
            values[name] = stream.next_in(*getattr(ranges, name))
    params = GeometryParams(phenotype=phenotype, seed=seed, **values)
    params.validate()
    return params


def _build_candidate(top: np.ndarray, nominal: np.ndarray, scale: float) -> np.ndarray:
    """Stack all eight curves around the anterior surface for a given scale."""
    width = top.shape[0]
    rows = np.broadcast_to(nominal.reshape(NUM_INTERVALS, -1), (NUM_INTERVALS, width))
    bounds = np.empty((NUM_BOUNDARIES, width), dtype=np.float64)
    bounds[1] = top
    bounds[0] = top - scale * rows[0]                      # air gap above
    for k in range(1, NUM_INTERVALS):                      # tissue and vitreous below
        bounds[k + 1] = bounds[k] + scale * rows[k]
    return bounds


def _violates(bounds: np.ndarray, nominal: np.ndarray, lower: np.ndarray, scale: float) -> bool:
    if np.any(np.diff(bounds, axis=0) <= 0):  # contact counts as a violation
        return True
    width = bounds.shape[1]
    thick = np.broadcast_to((scale * nominal).reshape(NUM_INTERVALS, -1), (NUM_INTERVALS, width))
    return bool(np.any(thick < lower.reshape(NUM_INTERVALS, 1)))


def stack_layers(
    top: np.ndarray,
    profiles: ThicknessProfiles,
    delta: float,
    seed: int,
    x: np.ndarray | None = None,
    params: GeometryParams | None = None,
) -> BoundarySet:
    """Stack the seven intervals around the anterior surface curve.

    A single multiplicative perturbation s ~ U(1-delta, 1+delta) scales every
    nominal profile.  If the perturbed stack breaks strict ordering or a
    layer lower bound, the deviation (s - 1) is halved repeatedly (up to
    MAX_DAMPING_ITERATIONS, then s = 1 exactly); if even the nominal profiles
    violate the constraints the configuration is unsatisfiable.
    """
    profiles.validate()
    top = np.asarray(top, dtype=np.float64)
    if top.ndim != 1 or not np.all(np.isfinite(top)):
        raise GeometryError("top curve must be a finite 1-D array")
    if not 0.0 <= delta <= 0.5:
        raise GeometryError(f"delta out of range: {delta}")

    nominal = np.asarray(profiles.nominal, dtype=np.float64)
    lower = np.asarray(profiles.lower_bounds, dtype=np.float64)
    if nominal.ndim == 2 and nominal.shape[1] != top.shape[0]:
        raise GeometryError("per-column profiles must match the grid width")

    stream = UniformStream(seed)
    s_initial = stream.next_in(1.0 - delta, 1.0 + delta)

    candidates = [1.0 + (s_initial - 1.0) * DAMPING_FACTOR**i
                  for i in range(MAX_DAMPING_ITERATIONS + 1)]
    candidates.append(1.0)  # final fallback: drop the perturbation entirely
    for scale in candidates:
        bounds = _build_candidate(top, nominal, scale)
        if not _violates(bounds, nominal, lower, scale):
            if x is None:
                x = np.arange(top.shape[0], dtype=np.float64)  # index positions
            return BoundarySet(
                x=np.asarray(x, dtype=np.float64),
                boundaries=bounds,
                thickness_scale=scale,
                params=params,
            )
    raise UnsatisfiableGeometryError(
        "nominal thickness profiles violate ordering or lower bounds"
    )


def calibrate_and_crop(
    b: BoundarySet,
    lateral_span: float,
    axial_span: float | None = None,
    aspect: float | None = None,
) -> BoundarySet:
    """Restrict to a centered lateral window and calibrate the axial extent.

    With aspect/axial_span None the result is a pure lateral restriction
    (identity when the window covers the full grid).  Otherwise the stacked
    content is mapped affinely onto [0, axial_span] (axial_span defaults to
    aspect * lateral_span), and the outer window curves y0/y7 become the flat
    window edges; the applied stretch factor is recorded on the result.
    """
    half = lateral_span / 2.0
    x = b.x
    pitch = x[1] - x[0] if x.shape[0] > 1 else 0.0
    if lateral_span > (x[-1] - x[0]) + pitch + 1e-9:
        raise GeometryError("lateral window exceeds the geometry extent")
    keep = np.abs(x) <= half + 1e-9
    if not np.any(keep):
        raise GeometryError("lateral window does not intersect the grid")

    xk = x[keep].copy()
    bounds = b.boundaries[:, keep].copy()

    if aspect is None and axial_span is None:
        return BoundarySet(
            x=xk, boundaries=bounds, thickness_scale=b.thickness_scale,
            axial_stretch=b.axial_stretch, aspect=b.aspect, params=b.params,
        )

    if axial_span is None:
        axial_span = aspect * lateral_span
    if axial_span <= 0:
        raise GeometryError(f"axial span must be positive, got {axial_span}")

    z_top = float(bounds[0].min())
    z_bot = float(bounds[-1].max())
    stretch = axial_span / (z_bot - z_top)
    bounds = (bounds - z_top) * stretch
    bounds[0, :] = 0.0          # flat window edges; interior curves keep shape
    bounds[-1, :] = axial_span

    out = BoundarySet(
        x=xk, boundaries=bounds, thickness_scale=b.thickness_scale,
        axial_stretch=stretch, aspect=axial_span / lateral_span, params=b.params,
    )
    out.assert_ordered()
    return out


def build_sample_geometry(
    ranges: SamplingRanges,
    profiles: ThicknessProfiles,
    lateral_span: float,
    columns: int,
    geometry_seed: int,
    thickness_seed: int,
    phenotype: str = HEALTHY,
    aspect: float | None = 1.0 / 3.0,
    axial_span: float | None = None,
) -> BoundarySet:
    """Full geometry stage: sample, stack, calibrate.  Pure in its seeds."""
    params = sample_geometry(ranges, geometry_seed, phenotype)
    x = lateral_grid(lateral_span, columns)
    top = anterior_surface(x, params)
    stacked = stack_layers(top, profiles, ranges.delta, thickness_seed, x=x, params=params)
    return calibrate_and_crop(stacked, lateral_span, axial_span=axial_span, aspect=aspect)
