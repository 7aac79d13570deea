"""Parametric OCT system response and display rendering.

Raw A-lines are weighted by a confocal Gaussian centered at the focal depth
and a cosine-fourth sensitivity roll-off (extra attenuation beyond
mid-range), floored to avoid total signal collapse, then log-compressed and
percentile-normalized for display.  All weighting is evaluated at depth-bin
centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SystemModelError(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Depth-response constants, in the same axial units as the A-line bins."""

    focal_depth: float          # confocal peak position
    confocal_width: float       # Gaussian sigma of the confocal gate
    max_depth: float            # axial window depth
    midrange_attenuation: float = 0.5   # extra factor beyond max_depth / 2
    floor: float = 1e-6         # linear detected-weight floor

    def validate(self) -> None:
        if self.confocal_width <= 0:
            raise SystemModelError("confocal_width must be positive")
        if self.max_depth <= 0:
            raise SystemModelError("max_depth must be positive")
        if not 0.0 < self.midrange_attenuation < 1.0:
            raise SystemModelError("midrange_attenuation must lie in (0, 1)")
        if self.floor <= 0:
            raise SystemModelError("floor must be positive")

    @classmethod
    def for_depth(cls, max_depth: float, focal_fraction: float = 0.3,
                  width_fraction: float = 0.25, midrange_attenuation: float = 0.5,
                  floor: float = 1e-6) -> "SystemParams":
        """Defaults expressed as fractions of the axial window depth."""
        return cls(
            focal_depth=focal_fraction * max_depth,
            confocal_width=width_fraction * max_depth,
            max_depth=max_depth,
            midrange_attenuation=midrange_attenuation,
            floor=floor,
        )

    def to_dict(self) -> dict:
        return {
            "focal_depth": self.focal_depth,
            "confocal_width": self.confocal_width,
            "max_depth": self.max_depth,
            "midrange_attenuation": self.midrange_attenuation,
            "floor": self.floor,
        }


@dataclass(frozen=True)
class RenderParams:
    # The high percentile must land inside the sparse bright tail of an
    # A-line grid (interface echoes cover well under 0.5% of pixels), or the
    # contrast stretch degenerates; 99.95 is safe down to ~100 photons/A-line.
    epsilon: float = 1e-8          # log offset, relative to the grid peak
    percentile_low: float = 1.0
    percentile_high: float = 99.95
    bit_depth: int = 16

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise SystemModelError("epsilon must be positive")
        if not 0.0 <= self.percentile_low < self.percentile_high <= 100.0:
            raise SystemModelError("percentile bounds must satisfy 0 <= low < high <= 100")
        if not 1 <= self.bit_depth <= 16:
            raise SystemModelError("bit_depth must lie in 1..16")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "percentile_low": self.percentile_low,
            "percentile_high": self.percentile_high,
            "bit_depth": self.bit_depth,
        }


def confocal_weight(z, focal_depth: float, confocal_width: float):
    """Gaussian confocal gate, 1 at the focal depth."""
    if confocal_width <= 0:
        raise SystemModelError("confocal_width must be positive")
    z = np.asarray(z, dtype=np.float64)
    out = np.exp(-((z - focal_depth) ** 2) / (2.0 * confocal_width**2))
    return float(out) if out.ndim == 0 else out


def rolloff_weight(z, max_depth: float, midrange_attenuation: float):
    """cos^4 sensitivity roll-off, further attenuated beyond max_depth / 2."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0.0) or np.any(z > max_depth):
        raise SystemModelError("depth outside [0, max_depth]")
    out = np.cos(np.pi * z / max_depth) ** 4
    out = np.where(z > max_depth / 2.0, midrange_attenuation * out, out)
    return float(out) if out.ndim == 0 else out


def apply_system_effects(r: np.ndarray, p: SystemParams) -> np.ndarray:
    """Row-wise depth weighting of an (bins, W) grid, floored at p.floor."""
    p.validate()
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise SystemModelError("detected weights must be nonnegative")
    bins = r.shape[0]
    z = (np.arange(bins, dtype=np.float64) + 0.5) * (p.max_depth / bins)
    gain = confocal_weight(z, p.focal_depth, p.confocal_width) \
        * rolloff_weight(z, p.max_depth, p.midrange_attenuation)
    out = r * gain.reshape(-1, *([1] * (r.ndim - 1)))
    return np.maximum(out, p.floor)


def render_bscan(r_sys: np.ndarray, rp: RenderParams) -> tuple[np.ndarray, bool]:
    """Log-compress and percentile-normalize into [0, 1]; returns (image, degenerate).

    The log offset is epsilon relative to the grid peak and the output is
    quantized to rp.bit_depth levels, which makes the rendering exactly
    invariant to a global positive rescaling of its input.  A constant input
    has no contrast to stretch: it renders all-zero with the degenerate flag.
    """
    rp.validate()
    r_sys = np.asarray(r_sys, dtype=np.float64)
    if np.any(r_sys <= 0):
        raise SystemModelError("render input must be strictly positive")
    compressed = np.log(r_sys + rp.epsilon * r_sys.max())
    lo, hi = np.percentile(compressed, [rp.percentile_low, rp.percentile_high])
    if hi <= lo:
        return np.zeros_like(compressed), True
    image = np.clip((compressed - lo) / (hi - lo), 0.0, 1.0)
    levels = float(2**rp.bit_depth - 1)
    return np.round(image * levels) / levels, False


@dataclass(frozen=True)
class NoiseConfig:
    """Optional display-domain noise; None disables a component."""

    speckle_shape: float | None = None   # unit-mean gamma shape k
    gaussian_std: float | None = None    # additive zero-mean sigma

    def validate(self) -> None:
        if self.speckle_shape is not None and self.speckle_shape <= 0:
            raise SystemModelError("speckle_shape must be positive when enabled")
        if self.gaussian_std is not None and self.gaussian_std < 0:
            raise SystemModelError("gaussian_std must be nonnegative")

    @property
    def enabled(self) -> bool:
        return self.speckle_shape is not None or self.gaussian_std is not None

    def to_dict(self) -> dict:
        return {"speckle_shape": self.speckle_shape, "gaussian_std": self.gaussian_std}


def add_noise(image: np.ndarray, cfg: NoiseConfig, seed: int) -> np.ndarray:
    """Speckle-like multiplicative and/or additive Gaussian noise, clamped to [0, 1].

    Pure in (image, cfg, seed); with both components disabled the input is
    returned unchanged.
    """
    cfg.validate()
    if not cfg.enabled:
        return image
    rng = np.random.default_rng(seed)
    out = np.asarray(image, dtype=np.float64)
    if cfg.speckle_shape is not None:
        k = cfg.speckle_shape
        out = out * rng.gamma(k, 1.0 / k, size=out.shape)
    if cfg.gaussian_std is not None:
        out = out + rng.normal(0.0, cfg.gaussian_std, size=out.shape)
    return np.clip(out, 0.0, 1.0)
