"""On-disk sample layout and bit-exact readers/writers.

Per sample directory:
    image.png      16-bit grayscale rendering
    image.f32      rendered image, raw float32
    mask7.png      labels 1..7 (air .. vitreous)
    mask5.png      corneal five-class mask, 0 = background
    n.f32 mua.f32 mus.f32 g.f32   optical coefficient maps
    r_raw.f32 r_sys.f32           optional linear-domain grids
    meta.json      everything needed to regenerate the sample bitwise
    checksums.json sha256 per artifact, written last

.f32 files are row-major little-endian float32 with no header; grid
dimensions live in meta.json.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np
from PIL import Image

META_NAME = "meta.json"
CHECKSUM_NAME = "checksums.json"

GRID_FILES = ("image.f32", "n.f32", "mua.f32", "mus.f32", "g.f32")
IMAGE_FILES = ("image.png", "mask7.png", "mask5.png")
OPTIONAL_GRIDS = ("r_raw.f32", "r_sys.f32")


class SampleIOError(RuntimeError):
    pass


def write_f32(path: Path, grid: np.ndarray) -> None:
    np.ascontiguousarray(grid, dtype="<f4").tofile(path)


def read_f32(path: Path, shape: tuple[int, int]) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    expected = shape[0] * shape[1]
    if data.size != expected:
        raise SampleIOError(f"{path}: expected {expected} float32 values, found {data.size}")
    return data.reshape(shape)


def write_png16(path: Path, image01: np.ndarray) -> None:
    """Unit-range image to 16-bit grayscale PNG."""
    levels = np.round(np.clip(image01, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(levels, mode="I;16").save(path)


def read_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img)


def write_png8(path: Path, values: np.ndarray) -> None:
    Image.fromarray(values.astype(np.uint8), mode="L").save(path)


def write_json(path: Path, data: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def expected_files(store_raw: bool) -> tuple[str, ...]:
    files = IMAGE_FILES + GRID_FILES
    if store_raw:
        files = files + OPTIONAL_GRIDS
    return files + (META_NAME,)


def write_checksums(sample_dir: Path) -> dict:
    """Hash every artifact already present (meta included), write the ledger."""
    sums = {}
    for name in sorted(os.listdir(sample_dir)):
        if name == CHECKSUM_NAME:
            continue
        sums[name] = sha256_file(sample_dir / name)
    write_json(sample_dir / CHECKSUM_NAME, sums)
    return sums


def verify_checksums(sample_dir: Path) -> tuple[bool, list[str]]:
    """Re-hash the listed artifacts; returns (all_ok, mismatched names)."""
    ledger_path = sample_dir / CHECKSUM_NAME
    if not ledger_path.is_file():
        return False, [CHECKSUM_NAME]
    try:
        sums = read_json(ledger_path)
    except (OSError, json.JSONDecodeError):
        return False, [CHECKSUM_NAME]
    bad = []
    for name, expected in sums.items():
        path = sample_dir / name
        if not path.is_file() or sha256_file(path) != expected:
            bad.append(name)
    return not bad, bad
