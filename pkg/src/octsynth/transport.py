"""Monte Carlo photon transport through per-column layered stacks.

Each A-line is an independent 1-D layered-medium simulation built from that
column's thickness vector (no lateral photon exchange between columns).
Photon histories follow the classic weighted random walk: exponential step
sampling, fractional absorption at each interaction, Henyey-Greenstein
scattering, stochastic Fresnel reflection/refraction at layer boundaries,
and Russian roulette termination of low-weight photons.

A photon that leaves the top surface inside the detection cone and aperture
is binned at half its total geometric path length: the cumulative
index-weighted optical path halved and divided by the path's mean index,
which places specular interface echoes at their geometric depths and keeps
the A-line aligned with the label map.

All lengths here are centimeters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .optics import OpticsTable

U64 = np.uint64


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class TransportConfig:
    photons_per_aline: int = 10_000
    axial_bins: int = 1024
    roulette_threshold: float = 1e-4
    roulette_survival: float = 0.1
    acceptance_half_angle: float = math.radians(5.0)  # radians
    aperture_radius: float = 0.05                     # cm
    max_interactions: int = 1_000_000
    seed_root: int = 0

    def validate(self) -> None:
        if self.photons_per_aline < 1:
            raise TransportError("photons_per_aline must be >= 1")
        if self.axial_bins < 1:
            raise TransportError("axial_bins must be >= 1")
        if not 0.0 < self.roulette_threshold < 1.0:
            raise TransportError("roulette_threshold must lie in (0, 1)")
        if not 0.0 < self.roulette_survival <= 1.0:
            raise TransportError("roulette_survival must lie in (0, 1]")
        if not 0.0 < self.acceptance_half_angle < math.pi / 2:
            raise TransportError("acceptance_half_angle must lie in (0, pi/2)")
        if self.aperture_radius <= 0:
            raise TransportError("aperture_radius must be positive")
        if self.max_interactions < 1:
            raise TransportError("max_interactions must be >= 1")

    def to_dict(self) -> dict:
        return {
            "photons_per_aline": self.photons_per_aline,
            "axial_bins": self.axial_bins,
            "roulette_threshold": self.roulette_threshold,
            "roulette_survival": self.roulette_survival,
            "acceptance_half_angle": self.acceptance_half_angle,
            "aperture_radius": self.aperture_radius,
            "max_interactions": self.max_interactions,
            "seed_root": self.seed_root,
        }


@dataclass(frozen=True)
class LayeredStack:
    """Planar layers, top to bottom, with vacuum-equivalent ambience above/below."""

    thickness: np.ndarray  # (L,) cm
    n: np.ndarray
    mu_a: np.ndarray
    mu_s: np.ndarray
    g: np.ndarray
    n_above: float = 1.0
    n_below: float | None = None  # None: index-matched to the last layer

    def validate(self) -> None:
        arrays = (self.thickness, self.n, self.mu_a, self.mu_s, self.g)
        length = self.thickness.shape[0]
        if length < 1 or any(a.shape != (length,) for a in arrays):
            raise TransportError("stack arrays must share one (L,) shape")
        if not np.all(self.thickness > 0):
            raise TransportError("layer thicknesses must be positive")
        if not np.all(np.diff(self.boundaries()) > 0):
            raise TransportError("cumulative boundaries must increase strictly")

    def boundaries(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.thickness)))

    @property
    def depth(self) -> float:
        return float(self.thickness.sum())

    def ambient_below(self) -> float:
        return float(self.n[-1]) if self.n_below is None else float(self.n_below)

    @classmethod
    def from_optics(cls, thickness_cm: np.ndarray, table: OpticsTable) -> "LayeredStack":
        return cls(
            thickness=np.asarray(thickness_cm, dtype=np.float64),
            n=table.column("n"),
            mu_a=table.column("mu_a"),
            mu_s=table.column("mu_s"),
            g=table.column("g"),
        )


@dataclass
class PhotonState:
    """In-flight photon record (positions in cm, direction cosines unit-norm)."""

    position: np.ndarray
    direction: np.ndarray
    weight: float
    layer: int
    optical_path: float = 0.0

    def validate(self) -> None:
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > 1e-9:
            raise TransportError(f"direction norm {norm} not unit")
        if not 0.0 < self.weight <= 1.0:
            raise TransportError(f"weight {self.weight} outside (0, 1]")


@dataclass
class AScanAccumulator:
    """Depth-binned detected weight plus the weight ledger for one A-line."""

    r: np.ndarray          # (bins,) detected weight per depth bin
    depth: float           # cm spanned by the bins
    photons: int
    launched: float
    detected: float
    escaped: float
    absorbed: float
    transmitted: float
    roulette_loss: float
    roulette_gain: float

    def conservation_residual(self) -> float:
        """Relative gap in launched + boosts = all terminal weight sinks."""
        sinks = (self.detected + self.escaped + self.absorbed
                 + self.transmitted + self.roulette_loss)
        return abs(self.launched + self.roulette_gain - sinks) / self.launched

    def counters_dict(self) -> dict:
        return {
            "launched": self.launched, "detected": self.detected,
            "escaped": self.escaped, "absorbed": self.absorbed,
            "transmitted": self.transmitted,
            "roulette_loss": self.roulette_loss,
            "roulette_gain": self.roulette_gain,
        }


@dataclass
class BScanResult:
    """Detected-weight grid (axial_bins rows, one column per A-line)."""

    r: np.ndarray             # (bins, W)
    depth: float
    photons_per_aline: int
    column_counters: np.ndarray = field(repr=False)  # (W, 7)

    def totals(self) -> dict:
        sums = self.column_counters.sum(axis=0)
        keys = ("launched", "detected", "escaped", "absorbed", "transmitted",
                "roulette_loss", "roulette_gain")
        return {k: float(v) for k, v in zip(keys, sums)}

    def conservation_residual(self) -> float:
        t = self.totals()
        sinks = (t["detected"] + t["escaped"] + t["absorbed"]
                 + t["transmitted"] + t["roulette_loss"])
        return abs(t["launched"] + t["roulette_gain"] - sinks) / t["launched"]


def sample_step(mu_t, xi):
    """Exponential free-path draw s = -ln(xi) / mu_t; ballistic (inf) when mu_t = 0."""
    mu_t = np.asarray(mu_t, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(xi <= 0.0) or np.any(xi >= 1.0):
        raise TransportError("xi must lie strictly inside (0, 1)")
    if np.any(mu_t < 0.0):
        raise TransportError("mu_t must be nonnegative")
    safe = np.where(mu_t > 0.0, mu_t, 1.0)
    out = np.where(mu_t > 0.0, -np.log(xi) / safe, np.inf)
    return float(out) if out.ndim == 0 else out


def absorb(weight, mu_a: float, mu_t: float):
    """Split weight into (deposited, remaining) by the absorption fraction."""
    if mu_t <= 0.0:
        raise TransportError("mu_t must be positive at an interaction")
    deposited = np.asarray(weight, dtype=np.float64) * (mu_a / mu_t)
    remaining = weight - deposited
    if deposited.ndim == 0:
        return float(deposited), float(remaining)
    return deposited, remaining


def hg_cos_theta(g: float, xi):
    """Henyey-Greenstein polar cosine via the inverse CDF (isotropic at g = 0)."""
    xi = np.asarray(xi, dtype=np.float64)
    if g == 0.0:
        ct = 2.0 * xi - 1.0
    else:
        if not -1.0 < g < 1.0:
            raise TransportError("anisotropy g must lie in (-1, 1)")
        tmp = (1.0 - g * g) / (1.0 - g + 2.0 * g * xi)
        ct = (1.0 + g * g - tmp * tmp) / (2.0 * g)
    ct = np.clip(ct, -1.0, 1.0)
    return float(ct) if ct.ndim == 0 else ct


def scatter_direction(direction, g: float, xi_theta: float, xi_phi: float) -> np.ndarray:
    """Rotate a unit direction by an HG polar angle and uniform azimuth; renormalized."""
    ux, uy, uz = (float(v) for v in direction)
    ct = hg_cos_theta(g, xi_theta)
    st = math.sqrt(max(0.0, 1.0 - ct * ct))
    phi = 2.0 * math.pi * xi_phi
    cp, sp = math.cos(phi), math.sin(phi)
    if abs(uz) > 0.99999:
        out = np.array([st * cp, st * sp, ct if uz >= 0.0 else -ct])
    else:
        den = math.sqrt(1.0 - uz * uz)
        out = np.array([
            st * (ux * uz * cp - uy * sp) / den + ux * ct,
            st * (uy * uz * cp + ux * sp) / den + uy * ct,
            -den * st * cp + uz * ct,
        ])
    return out / np.linalg.norm(out)


def fresnel_reflectance(n1: float, n2: float, cos_incident):
    """Unpolarized Fresnel reflectance; 1.0 beyond the critical angle."""
    ci = np.asarray(cos_incident, dtype=np.float64)
    if np.any(ci < 0.0) or np.any(ci > 1.0):
        raise TransportError("cos_incident must lie in [0, 1]")
    if n1 == n2:
        out = np.zeros_like(ci)
        return float(out) if out.ndim == 0 else out
    sin_t2 = (n1 / n2) ** 2 * (1.0 - ci * ci)
    tir = sin_t2 >= 1.0
    ct = np.sqrt(np.where(tir, 0.0, 1.0 - sin_t2))
    rs = np.where(tir, 1.0, (n1 * ci - n2 * ct) / (n1 * ci + n2 * ct))
    rp = np.where(tir, 1.0, (n1 * ct - n2 * ci) / (n1 * ct + n2 * ci))
    out = np.where(tir, 1.0, 0.5 * (rs * rs + rp * rp))
    return float(out) if out.ndim == 0 else out


def refract(n1: float, n2: float, direction) -> np.ndarray:
    """Snell refraction across a horizontal interface (caller must exclude TIR)."""
    ux, uy, uz = (float(v) for v in direction)
    ratio = n1 / n2
    sin_t2 = ratio * ratio * (1.0 - uz * uz)
    if sin_t2 >= 1.0:
        raise TransportError("total internal reflection; no transmitted direction")
    ct = math.sqrt(1.0 - sin_t2)
    out = np.array([ux * ratio, uy * ratio, ct if uz > 0.0 else -ct])
    return out / np.linalg.norm(out)


def fresnel_interface(n1: float, n2: float, direction, xi: float):
    """Stochastic boundary event: (transmitted, new_direction).

    Reflects with probability equal to the unpolarized reflectance (always
    under total internal reflection), otherwise refracts by Snell's law.
    """
    direction = np.asarray(direction, dtype=np.float64)
    rf = fresnel_reflectance(n1, n2, abs(float(direction[2])))
    if xi < rf:
        out = direction.copy()
        out[2] = -out[2]
        return False, out
    return True, refract(n1, n2, direction)


def russian_roulette(weight, threshold: float, survival: float, xi):
    """Unbiased low-weight termination; survivors are boosted by 1/survival."""
    if not 0.0 < survival <= 1.0:
        raise TransportError("survival probability must lie in (0, 1]")
    w = np.asarray(weight, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    below = w < threshold
    survive = xi < survival
    out = np.where(below, np.where(survive, w / survival, 0.0), w)
    return float(out) if out.ndim == 0 else out


def _as_u64(value: int) -> np.uint64:
    return np.uint64(int(value) & ((1 << 64) - 1))


def simulate_a_line(stack: LayeredStack, cfg: TransportConfig,
                    column_id: int = 0, sample_id: int = 0) -> AScanAccumulator:
    """Trace one column's photons; pure in (stack, cfg, column_id, sample_id)."""
    cfg.validate()
    stack.validate()
    out_r = np.zeros((1, cfg.axial_bins), dtype=np.float64)
    out_c = np.zeros((1, _kernels.NUM_COUNTERS), dtype=np.float64)
    _kernels.run_bscan(
        np.ascontiguousarray(stack.thickness.reshape(1, -1)),
        np.ascontiguousarray(stack.n), np.ascontiguousarray(stack.mu_a),
        np.ascontiguousarray(stack.mu_s), np.ascontiguousarray(stack.g),
        float(stack.n_above), stack.ambient_below(),
        cfg.photons_per_aline, cfg.axial_bins,
        cfg.roulette_threshold, cfg.roulette_survival,
        math.cos(cfg.acceptance_half_angle), cfg.aperture_radius,
        cfg.max_interactions,
        _as_u64(cfg.seed_root), _as_u64(sample_id), _as_u64(column_id),
        out_r, out_c,
    )
    c = out_c[0]
    return AScanAccumulator(
        r=out_r[0], depth=stack.depth, photons=cfg.photons_per_aline,
        launched=float(c[_kernels.LAUNCHED]), detected=float(c[_kernels.DETECTED]),
        escaped=float(c[_kernels.ESCAPED]), absorbed=float(c[_kernels.ABSORBED]),
        transmitted=float(c[_kernels.TRANSMITTED]),
        roulette_loss=float(c[_kernels.ROULETTE_LOSS]),
        roulette_gain=float(c[_kernels.ROULETTE_GAIN]),
    )


def simulate_b_scan(tmap: np.ndarray, table: OpticsTable, cfg: TransportConfig,
                    sample_id: int = 0) -> BScanResult:
    """Trace every column of a (7, W) thickness map independently.

    Columns share the optics table; the per-column depth must be uniform
    (guaranteed by the calibrated window) so all A-lines share one bin grid.
    """
    cfg.validate()
    table.validate()
    tmap = np.asarray(tmap, dtype=np.float64)
    if tmap.ndim != 2 or tmap.shape[0] != len(table.layers):
        raise TransportError("thickness map must be (layers, W)")
    if np.any(tmap <= 0):
        raise TransportError("thickness map entries must be positive")
    depths = tmap.sum(axis=0)
    depth = float(depths[0])
    if not np.allclose(depths, depth, rtol=1e-9, atol=0.0):
        raise TransportError("columns must share one axial depth")

    width = tmap.shape[1]
    out_r = np.zeros((width, cfg.axial_bins), dtype=np.float64)
    out_c = np.zeros((width, _kernels.NUM_COUNTERS), dtype=np.float64)
    _kernels.run_bscan(
        np.ascontiguousarray(tmap.T),
        table.column("n"), table.column("mu_a"),
        table.column("mu_s"), table.column("g"),
        1.0, float(table.column("n")[-1]),
        cfg.photons_per_aline, cfg.axial_bins,
        cfg.roulette_threshold, cfg.roulette_survival,
        math.cos(cfg.acceptance_half_angle), cfg.aperture_radius,
        cfg.max_interactions,
        _as_u64(cfg.seed_root), _as_u64(sample_id), _as_u64(0),
        out_r, out_c,
    )
    return BScanResult(
        r=np.ascontiguousarray(out_r.T), depth=depth,
        photons_per_aline=cfg.photons_per_aline, column_counters=out_c,
    )
