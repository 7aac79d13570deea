"""Command-line front end.

Subcommands: generate, preview, validate, sweep, info.  Progress goes to
standard error; with --json a single machine-readable summary line goes to
standard output.  Exit codes: 0 success, 1 failed checks or failed samples,
2 unusable configuration or input.

Flag precedence per field: dedicated flags > --set overrides > config file >
built-in defaults.  OCTSYNTH_OUTPUT_ROOT, when set, replaces the default
output root.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from ._version import __version__
from .config import (ConfigError, DatasetConfig, apply_override, config_from_dict,
                     config_hash, parse_set_expression, read_config_file)
from .geometry import PHENOTYPES

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

log = logging.getLogger("octsynth")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="JSON configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="PATH=VALUE",
                        help="override any config field by dotted path")
    parser.add_argument("--seed-root", type=int, default=None)
    parser.add_argument("--output", default=None, metavar="DIR",
                        help="output root (default: config value or $OCTSYNTH_OUTPUT_ROOT)")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel sample workers (default: available cores)")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable summary line on stdout")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")


def _add_generation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--samples", type=int, default=None,
                        help="total_samples override")
    parser.add_argument("--healthy-fraction", type=float, default=None)
    parser.add_argument("--photons", type=int, default=None,
                        help="transport.photons_per_aline override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="octsynth",
        description="Synthetic corneal OCT B-scan generator with exact multilayer labels.",
    )
    parser.add_argument("--version", action="version", version=f"octsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset and its manifest")
    _add_common(p)
    _add_generation_flags(p)

    p = sub.add_parser("preview", help="generate one sample with quick-look figures")
    _add_common(p)
    _add_generation_flags(p)
    p.add_argument("--sample-id", type=int, default=0)
    p.add_argument("--phenotype", choices=PHENOTYPES, default=None,
                   help="force the phenotype instead of the id partition")

    p = sub.add_parser("validate", help="check a sample directory or dataset root")
    p.add_argument("path", help="sample directory or dataset root")
    p.add_argument("--deep", action="store_true",
                   help="also regenerate from metadata and compare bitwise")
    p.add_argument("--json", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("-q", "--quiet", action="store_true")

    p = sub.add_parser("sweep", help="run the configured parameter sweep")
    _add_common(p)
    _add_generation_flags(p)

    p = sub.add_parser("info", help="print the fully resolved configuration")
    _add_common(p)
    _add_generation_flags(p)
    return parser


def resolve_config(args: argparse.Namespace) -> DatasetConfig:
    """defaults -> env default root -> config file -> --set -> dedicated flags."""
    if getattr(args, "config", None):
        raw = read_config_file(args.config)
        cfg = config_from_dict(raw)
        file_sets_root = "output_root" in raw
    else:
        cfg = DatasetConfig()
        file_sets_root = False

    env_root = os.environ.get("OCTSYNTH_OUTPUT_ROOT")
    if env_root and not file_sets_root:
        cfg = apply_override(cfg, "output_root", env_root)

    for expr in getattr(args, "overrides", []):
        path, value = parse_set_expression(expr)
        cfg = apply_override(cfg, path, value)

    flag_map = [
        ("seed_root", getattr(args, "seed_root", None)),
        ("output_root", getattr(args, "output", None)),
        ("total_samples", getattr(args, "samples", None)),
        ("healthy_fraction", getattr(args, "healthy_fraction", None)),
        ("transport.photons_per_aline", getattr(args, "photons", None)),
    ]
    for path, value in flag_map:
        if value is not None:
            cfg = apply_override(cfg, path, value)
    cfg.validate()
    return cfg


def _setup_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    if getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(message)s")


def _summary(args: argparse.Namespace, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(" ".join(f"{k}={v}" for k, v in payload.items()))


def cmd_generate(args: argparse.Namespace) -> int:
    from .pipeline import generate_dataset

    cfg = resolve_config(args)
    workers = args.workers or (os.cpu_count() or 1)
    start = time.perf_counter()
    result = generate_dataset(cfg, workers=workers)
    elapsed = time.perf_counter() - start
    _summary(args, {
        "command": "generate",
        "samples": len(result.manifest.rows),
        "failed": len(result.failures),
        "reused": result.reused,
        "output": cfg.output_root,
        "config_hash": config_hash(cfg.resolved()),
        "seconds": round(elapsed, 3),
    })
    return EXIT_OK if result.ok else EXIT_FAILED


def cmd_preview(args: argparse.Namespace) -> int:
    from .pipeline import generate_sample, sample_dirname, write_sample
    from .preview import render_preview

    cfg = resolve_config(args)
    record = generate_sample(cfg, args.sample_id, phenotype=args.phenotype)
    sample_dir = Path(cfg.output_root) / sample_dirname(args.sample_id)
    write_sample(record, sample_dir)
    figure = render_preview(record, sample_dir / "preview.png")
    _summary(args, {
        "command": "preview",
        "sample_id": args.sample_id,
        "phenotype": record.phenotype,
        "bulge_height": record.meta["geometry_params"]["bulge_height"],
        "dir": str(sample_dir),
        "figure": str(figure),
    })
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from .pipeline import MANIFEST_ROWS, validate_dataset, validate_sample
    from .sample_io import META_NAME

    target = Path(args.path)
    if not target.exists():
        log.error("path does not exist: %s", target)
        return EXIT_CONFIG
    if (target / META_NAME).is_file():
        reports = [validate_sample(target, deep=args.deep)]
    elif (target / MANIFEST_ROWS).is_file() or any(
            (p / META_NAME).is_file() for p in target.iterdir() if p.is_dir()):
        reports = validate_dataset(target, deep=args.deep)
    else:
        log.error("no sample or dataset found at %s", target)
        return EXIT_CONFIG

    failed = 0
    for report in reports:
        for line in report.lines():
            print(line, file=sys.stderr)
        failed += 0 if report.passed else 1
    _summary(args, {
        "command": "validate",
        "targets": len(reports),
        "failed": failed,
        "deep": bool(args.deep),
    })
    return EXIT_OK if failed == 0 else EXIT_FAILED


def cmd_sweep(args: argparse.Namespace) -> int:
    from .pipeline import run_sweep

    cfg = resolve_config(args)
    workers = args.workers or (os.cpu_count() or 1)
    results = run_sweep(cfg, workers=workers)
    failed = sum(len(r.failures) for r in results)
    _summary(args, {
        "command": "sweep",
        "datasets": len(results),
        "samples": sum(len(r.manifest.rows) for r in results),
        "failed": failed,
        "output": cfg.output_root,
    })
    return EXIT_OK if failed == 0 else EXIT_FAILED


def cmd_info(args: argparse.Namespace) -> int:
    cfg = resolve_config(args).resolved()
    print(json.dumps(cfg.to_dict(), sort_keys=True, indent=2))
    print(f"config_hash: {config_hash(cfg)}")
    print(f"generator_version: {__version__}")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "preview": cmd_preview,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
    "info": cmd_info,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
