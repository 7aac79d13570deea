"""End-to-end sample generation, dataset assembly, validation, sweeps.

A sample is a pure function of (resolved config, sample_id): geometry
sampling, map derivation, photon transport, system weighting, rendering, and
optional noise all draw from streams keyed off the root seed, so datasets
are byte-identical regardless of worker count or resume history.  Nothing
nondeterministic (timestamps, hostnames) is written to disk.

Sample ids are partitioned by phenotype: the first ceil(healthy_fraction * N)
ids are healthy, the rest keratoconus-like.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .config import (ConfigError, DatasetConfig, apply_override, canonical_json,
                     config_from_dict, config_hash)
from .geometry import BoundarySet, ThicknessProfiles, build_sample_geometry
from .optics import (CoefficientMaps, corneal_mask, default_optics_table,
                     identify_labels, project_coefficients, rasterize_labels,
                     thickness_map)
from .sample_io import (CHECKSUM_NAME, META_NAME, expected_files, read_f32,
                        read_json, read_png, sha256_file, verify_checksums,
                        write_checksums, write_f32, write_json, write_png8,
                        write_png16)
from .streams import derive_seed
from .system_model import add_noise, apply_system_effects, render_bscan
from .transport import simulate_b_scan

log = logging.getLogger("octsynth")

MANIFEST_HEADER = "manifest.json"
MANIFEST_ROWS = "manifest.jsonl"

# stream tags under the per-sample seed
_TAG_GEOMETRY = 1
_TAG_THICKNESS = 2
_TAG_NOISE = 3


class PipelineError(RuntimeError):
    pass


@dataclass
class SampleRecord:
    """One generated sample: grids plus regeneration metadata."""

    sample_id: int
    phenotype: str
    image: np.ndarray          # (H, W) in [0, 1]
    labels: np.ndarray         # (H, W) uint8, 1..7
    mask5: np.ndarray          # (H, W) uint8, 0..5
    coefficients: CoefficientMaps
    r_raw: np.ndarray
    r_sys: np.ndarray
    meta: dict

    def grids(self) -> dict:
        out = {"image.f32": self.image, "n.f32": self.coefficients.n,
               "mua.f32": self.coefficients.mu_a, "mus.f32": self.coefficients.mu_s,
               "g.f32": self.coefficients.g}
        if self.meta["config"]["store_raw"]:
            out["r_raw.f32"] = self.r_raw
            out["r_sys.f32"] = self.r_sys
        return out


def sample_seeds(seed_root: int, sample_id: int) -> dict:
    sample_seed = derive_seed(seed_root, sample_id)
    return {
        "root": seed_root,
        "sample": sample_seed,
        "geometry": derive_seed(sample_seed, _TAG_GEOMETRY),
        "thickness": derive_seed(sample_seed, _TAG_THICKNESS),
        "noise": derive_seed(sample_seed, _TAG_NOISE),
    }


def build_geometry(cfg: DatasetConfig, sample_id: int,
                   phenotype: str | None = None) -> BoundarySet:
    """Geometry stage only; used by generation, validation, and diagnostics."""
    phenotype = phenotype or cfg.phenotype_of(sample_id)
    seeds = sample_seeds(cfg.seed_root, sample_id)
    table = default_optics_table()
    profiles = ThicknessProfiles.uniform(
        table.nominal_thickness_um(), cfg.window.min_thickness_fraction)
    return build_sample_geometry(
        cfg.ranges, profiles,
        lateral_span=cfg.window.lateral_span_um,
        columns=cfg.width,
        geometry_seed=seeds["geometry"],
        thickness_seed=seeds["thickness"],
        phenotype=phenotype,
        aspect=cfg.window.aspect,
    )


def generate_sample(cfg: DatasetConfig, sample_id: int,
                    phenotype: str | None = None) -> SampleRecord:
    """Run the full pipeline for one id.  Deterministic in (cfg, sample_id)."""
    cfg = cfg.resolved()
    phenotype = phenotype or cfg.phenotype_of(sample_id)
    seeds = sample_seeds(cfg.seed_root, sample_id)
    table = default_optics_table()

    boundaries = build_geometry(cfg, sample_id, phenotype)
    tmap = thickness_map(boundaries)
    labels = rasterize_labels(boundaries, cfg.width, cfg.height)
    coefficients = project_coefficients(labels, table)

    scan = simulate_b_scan(tmap, table, cfg.transport, sample_id=sample_id)
    sys_params = cfg.system.to_params(scan.depth)
    r_sys = apply_system_effects(scan.r, sys_params)
    image, degenerate = render_bscan(r_sys, cfg.render)
    image = add_noise(image, cfg.noise, seeds["noise"])

    meta = {
        "schema_version": 1,
        "generator": "octsynth",
        "generator_version": __version__,
        "sample_id": sample_id,
        "phenotype": phenotype,
        "width": cfg.width,
        "height": cfg.height,
        "seeds": seeds,
        "geometry_params": boundaries.params.to_dict(),
        "thickness_scale": boundaries.thickness_scale,
        "axial_stretch": boundaries.axial_stretch,
        "aspect": boundaries.aspect,
        "axial_span_um": cfg.window.axial_span_um,
        "axial_depth_cm": scan.depth,
        "optics_table": table.to_dict(),
        "system_params": sys_params.to_dict(),
        "transport_totals": scan.totals(),
        "render_degenerate": degenerate,
        "grid_format": {"dtype": "float32", "order": "C", "byteorder": "little"},
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
    }
    return SampleRecord(
        sample_id=sample_id, phenotype=phenotype, image=image, labels=labels,
        mask5=corneal_mask(labels), coefficients=coefficients,
        r_raw=scan.r, r_sys=r_sys, meta=meta,
    )


def sample_dirname(sample_id: int) -> str:
    return f"{sample_id:05d}"


def write_sample(record: SampleRecord, sample_dir: Path) -> dict:
    """Write all artifacts, checksums last; returns the checksum ledger."""
    sample_dir = Path(sample_dir)
    sample_dir.mkdir(parents=True, exist_ok=True)
    write_png16(sample_dir / "image.png", record.image)
    write_png8(sample_dir / "mask7.png", record.labels)
    write_png8(sample_dir / "mask5.png", record.mask5)
    for name, grid in record.grids().items():
        write_f32(sample_dir / name, grid)
    write_json(sample_dir / META_NAME, record.meta)
    return write_checksums(sample_dir)


def manifest_row(record_meta: dict, checksums: dict) -> dict:
    return {
        "sample_id": record_meta["sample_id"],
        "phenotype": record_meta["phenotype"],
        "dir": sample_dirname(record_meta["sample_id"]),
        "seed": record_meta["seeds"]["sample"],
        "checksums": checksums,
    }


@dataclass
class Manifest:
    header: dict
    rows: list = field(default_factory=list)

    def phenotype_counts(self) -> dict:
        counts: dict[str, int] = {}
        for row in self.rows:
            counts[row["phenotype"]] = counts.get(row["phenotype"], 0) + 1
        return counts


def write_manifest(root: Path, manifest: Manifest) -> None:
    write_json(root / MANIFEST_HEADER, manifest.header)
    with open(root / MANIFEST_ROWS, "w", encoding="utf-8") as fh:
        for row in manifest.rows:
            fh.write(canonical_json(row) + "\n")


def load_manifest(root: Path) -> Manifest:
    root = Path(root)
    header = read_json(root / MANIFEST_HEADER)
    rows = []
    with open(root / MANIFEST_ROWS, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return Manifest(header=header, rows=rows)


def _reusable_sample(sample_dir: Path, cfg: DatasetConfig, sample_id: int) -> dict | None:
    """Checksum-verified row for an existing sample of this exact config."""
    if not sample_dir.is_dir():
        return None
    ok, _bad = verify_checksums(sample_dir)
    if not ok:
        return None
    try:
        meta = read_json(sample_dir / META_NAME)
    except Exception:
        return None
    if meta.get("sample_id") != sample_id or meta.get("config_hash") != config_hash(cfg):
        return None
    sums = read_json(sample_dir / CHECKSUM_NAME)
    return manifest_row(meta, sums)


def _generate_one(cfg_dict: dict, sample_id: int, root: str, threads: int):
    """Worker entry point; returns (sample_id, row | None, error | None)."""
    try:
        if threads > 0:
            import numba
            numba.set_num_threads(threads)
        cfg = config_from_dict(cfg_dict).resolved()
        record = generate_sample(cfg, sample_id)
        sums = write_sample(record, Path(root) / sample_dirname(sample_id))
        return sample_id, manifest_row(record.meta, sums), None
    except Exception as exc:  # isolated: one bad sample must not kill the batch
        return sample_id, None, f"{type(exc).__name__}: {exc}"


@dataclass
class DatasetResult:
    manifest: Manifest
    failures: list
    reused: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures


def generate_dataset(cfg: DatasetConfig, workers: int = 1,
                     sweep_info: dict | None = None) -> DatasetResult:
    """Generate/refresh all samples under cfg.output_root and write the manifest.

    Existing sample directories whose checksums and config hash verify are
    reused untouched, so interrupted runs resume where they left off.
    """
    cfg = cfg.resolved()
    root = Path(cfg.output_root)
    root.mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.to_dict()

    rows: dict[int, dict] = {}
    failures: list[tuple[int, str]] = []
    pending: list[int] = []
    reused = 0
    for sample_id in range(cfg.total_samples):
        row = _reusable_sample(root / sample_dirname(sample_id), cfg, sample_id)
        if row is not None:
            rows[sample_id] = row
            reused += 1
        else:
            pending.append(sample_id)
    if reused:
        log.info("reusing %d verified samples", reused)

    if pending:
        if workers <= 1:
            for sample_id in pending:
                sid, row, err = _generate_one(cfg_dict, sample_id, str(root), 0)
                _collect(rows, failures, sid, row, err)
        else:
            threads = max(1, (os.cpu_count() or 1) // workers)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_generate_one, cfg_dict, sid, str(root), threads)
                    for sid in pending
                ]
                for future in futures:
                    sid, row, err = future.result()
                    _collect(rows, failures, sid, row, err)

    ordered = [rows[sid] for sid in sorted(rows)]
    header = {
        "schema_version": 1,
        "generator_version": __version__,
        "config": cfg_dict,
        "config_hash": config_hash(cfg),
        "total_samples": cfg.total_samples,
        "generated": len(ordered),
        "phenotype_counts": _counts(ordered),
        "failed_ids": sorted(sid for sid, _ in failures),
    }
    if sweep_info:
        header["sweep"] = sweep_info
    manifest = Manifest(header=header, rows=ordered)
    write_manifest(root, manifest)
    for sid, err in failures:
        log.error("sample %d failed: %s", sid, err)
    return DatasetResult(manifest=manifest, failures=failures, reused=reused)


def _collect(rows, failures, sid, row, err):
    if err is None:
        rows[sid] = row
        log.info("sample %d done", sid)
    else:
        failures.append((sid, err))


def _counts(rows: list) -> dict:
    counts: dict[str, int] = {}
    for row in rows:
        counts[row["phenotype"]] = counts.get(row["phenotype"], 0) + 1
    return counts


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    target: str
    checks: list = field(default_factory=list)  # (name, ok, detail)

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def lines(self) -> list[str]:
        out = []
        for name, ok, detail in self.checks:
            mark = "PASS" if ok else "FAIL"
            suffix = f" ({detail})" if detail else ""
            out.append(f"{mark:4s} {self.target} {name}{suffix}")
        return out


def validate_sample(sample_dir: Path, deep: bool = False) -> ValidationReport:
    """Integrity checks for one stored sample; deep adds bitwise regeneration."""
    sample_dir = Path(sample_dir)
    report = ValidationReport(target=sample_dir.name)

    try:
        meta = read_json(sample_dir / META_NAME)
    except Exception as exc:
        report.add("meta", False, f"unreadable: {exc}")
        return report
    report.add("meta", True)

    store_raw = bool(meta.get("config", {}).get("store_raw", False))
    missing = [name for name in expected_files(store_raw)
               if not (sample_dir / name).is_file()]
    report.add("files", not missing, f"missing: {missing}" if missing else "")
    ok, bad = verify_checksums(sample_dir)
    report.add("checksums", ok, f"mismatch: {bad}" if bad else "")
    if missing or not ok:
        return report

    height, width = int(meta["height"]), int(meta["width"])
    shape = (height, width)
    try:
        image = read_f32(sample_dir / "image.f32", shape)
        grids = {name: read_f32(sample_dir / f"{name}.f32", shape)
                 for name in ("n", "mua", "mus", "g")}
        labels = read_png(sample_dir / "mask7.png")
        mask5 = read_png(sample_dir / "mask5.png")
        png16 = read_png(sample_dir / "image.png")
    except Exception as exc:
        report.add("dimensions", False, str(exc))
        return report
    dims_ok = labels.shape == shape and mask5.shape == shape and png16.shape == shape
    report.add("dimensions", dims_ok,
               "" if dims_ok else f"expected {shape}")

    report.add("label-range", bool(labels.min() >= 1 and labels.max() <= 7))
    report.add("label-monotonic", bool(np.all(np.diff(labels.astype(np.int16), axis=0) >= 0)))
    report.add("mask5-consistency", bool(np.array_equal(mask5, corneal_mask(labels))))

    table = default_optics_table()
    try:
        recovered = identify_labels(
            CoefficientMaps(n=grids["n"], mu_a=grids["mua"],
                            mu_s=grids["mus"], g=grids["g"]), table)
        mismatches = int(np.count_nonzero(recovered != labels))
        report.add("coefficient-consistency", mismatches == 0,
                   f"{mismatches} mismatched pixels" if mismatches else "")
    except Exception as exc:
        report.add("coefficient-consistency", False, str(exc))

    report.add("image-range", bool(image.min() >= 0.0 and image.max() <= 1.0))
    quantized = np.round(image.astype(np.float64) * 65535.0).astype(np.uint16)
    report.add("image-png-agreement", bool(np.array_equal(quantized, png16.astype(np.uint16))))

    if deep:
        try:
            cfg = config_from_dict(meta["config"]).resolved()
            record = generate_sample(cfg, int(meta["sample_id"]),
                                     phenotype=meta["phenotype"])
            same = (
                np.array_equal(record.image.astype(np.float32), image)
                and np.array_equal(record.labels, labels)
                and np.array_equal(record.mask5, mask5)
                and all(np.array_equal(
                    getattr(record.coefficients, attr).astype(np.float32), grids[key])
                    for attr, key in (("n", "n"), ("mu_a", "mua"),
                                      ("mu_s", "mus"), ("g", "g")))
            )
            report.add("regeneration", same, "" if same else "stored grids differ")
        except Exception as exc:
            report.add("regeneration", False, str(exc))
    return report


def validate_dataset(root: Path, deep: bool = False) -> list[ValidationReport]:
    """Validate every sample listed in the manifest (or every sample dir)."""
    root = Path(root)
    reports = []
    if (root / MANIFEST_ROWS).is_file():
        manifest = load_manifest(root)
        report = ValidationReport(target=MANIFEST_ROWS)
        expected = manifest.header.get("generated")
        report.add("row-count", expected == len(manifest.rows))
        dirs = [root / row["dir"] for row in manifest.rows]
        report.add("paths-exist", all(d.is_dir() for d in dirs))
        reports.append(report)
    else:
        dirs = sorted(p for p in root.iterdir() if (p / META_NAME).is_file())
        if not dirs:
            raise PipelineError(f"no samples found under {root}")
    reports.extend(validate_sample(d, deep=deep) for d in dirs)
    return reports


# ---------------------------------------------------------------------------
# sweeps


def sweep_combinations(cfg: DatasetConfig) -> list[dict]:
    """Expand the sweep axes into named override combinations (may be empty)."""
    if not cfg.sweep:
        return []
    for axis in cfg.sweep:  # fail on bad paths before any generation
        apply_override(cfg, axis.path, axis.values[0])
    combos = []
    for index, values in enumerate(itertools.product(*(a.values for a in cfg.sweep))):
        overrides = {axis.path: value for axis, value in zip(cfg.sweep, values)}
        name = "__".join(f"{p}={v}" for p, v in overrides.items())
        combos.append({"index": index, "name": name, "overrides": overrides})
    return combos


def run_sweep(cfg: DatasetConfig, workers: int = 1) -> list[DatasetResult]:
    """One sub-dataset per override combination under <output_root>/<name>.

    All combinations share the root seed so non-swept stages coincide
    exactly; each sub-manifest records its combination and a derived
    per-combination seed for downstream bookkeeping.
    """
    combos = sweep_combinations(cfg)
    if not combos:
        return [generate_dataset(cfg, workers=workers)]
    root = Path(cfg.output_root)
    results = []
    for combo in combos:
        sub = cfg
        for path, value in combo["overrides"].items():
            sub = apply_override(sub, path, value)
        sub = apply_override(sub, "output_root", str(root / combo["name"]))
        sub = apply_override(sub, "sweep", ())
        info = {
            "combination_index": combo["index"],
            "combination_seed": derive_seed(cfg.seed_root, combo["index"]),
            "overrides": combo["overrides"],
        }
        log.info("sweep combination %s", combo["name"])
        results.append(generate_dataset(sub, workers=workers, sweep_info=info))
    return results
