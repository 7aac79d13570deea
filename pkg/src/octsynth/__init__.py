"""Synthetic corneal OCT B-scan generator with pixel-aligned multilayer labels.

The pipeline composes five stages, each importable on its own:

    geometry      randomized five-layer boundary curves (healthy / keratoconus)
    optics        layer optical constants, thickness/label/coefficient maps
    transport     Monte Carlo photon transport per A-line column
    system_model  confocal gating, sensitivity roll-off, display rendering
    pipeline      sample packaging, manifests, validation, sweeps

Everything is deterministic given the configured seeds; see the README for
the CLI and the on-disk dataset layout.
"""

from ._version import __version__
from .config import DatasetConfig, config_hash, load_config
from .geometry import (BoundarySet, GeometryParams, SamplingRanges,
                       ThicknessProfiles, baseline_profile, calibrate_and_crop,
                       deformation, sample_geometry, stack_layers)
from .optics import (CoefficientMaps, LayerOptics, OpticsTable,
                     default_optics_table, project_coefficients,
                     rasterize_labels, thickness_map)
from .pipeline import (Manifest, SampleRecord, generate_dataset,
                       generate_sample, run_sweep, validate_sample)
from .system_model import (NoiseConfig, RenderParams, SystemParams, add_noise,
                           apply_system_effects, confocal_weight, render_bscan,
                           rolloff_weight)
from .transport import (AScanAccumulator, LayeredStack, PhotonState,
                        TransportConfig, absorb, fresnel_interface,
                        fresnel_reflectance, hg_cos_theta, russian_roulette,
                        sample_step, scatter_direction, simulate_a_line,
                        simulate_b_scan)

__all__ = [
    "__version__",
    "DatasetConfig", "config_hash", "load_config",
    "BoundarySet", "GeometryParams", "SamplingRanges", "ThicknessProfiles",
    "baseline_profile", "calibrate_and_crop", "deformation", "sample_geometry",
    "stack_layers",
    "CoefficientMaps", "LayerOptics", "OpticsTable", "default_optics_table",
    "project_coefficients", "rasterize_labels", "thickness_map",
    "Manifest", "SampleRecord", "generate_dataset", "generate_sample",
    "run_sweep", "validate_sample",
    "NoiseConfig", "RenderParams", "SystemParams", "add_noise",
    "apply_system_effects", "confocal_weight", "render_bscan", "rolloff_weight",
    "AScanAccumulator", "LayeredStack", "PhotonState", "TransportConfig",
    "absorb", "fresnel_interface", "fresnel_reflectance", "hg_cos_theta",
    "russian_roulette", "sample_step", "scatter_direction", "simulate_a_line",
    "simulate_b_scan",
]
