"""Command line entry point: ``sess enhance|batch|eval``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import harness
from .config import PRESETS, ConfigError, SessConfig, format_config, parse_config, preset

log = logging.getLogger("sess")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="key = value config file")
    g.add_argument("--preset", choices=sorted(PRESETS), help="per-network tuning (overridden by --config keys)")
    g.add_argument("--no-deep-reintro", action="store_true", help="do not merge the input map back in")
    g.add_argument(
        "--keep-reduced-superpixels",
        action="store_true",
        help="final color pass uses the decayed superpixel count instead of the initial one",
    )
    g.add_argument("--print-config", action="store_true", help="print the effective config and exit")


def _resolve_config(args) -> SessConfig:
    if args.config is not None:
        cfg = parse_config(args.config)
        if args.preset:
            log.warning("--preset ignored because --config was given")
    else:
        cfg = preset(args.preset or "u2net")
    if args.no_deep_reintro:
        cfg = cfg.replace(no_deep_reintro=True)
    if args.keep_reduced_superpixels:
        cfg = cfg.replace(keep_reduced_superpixels=True)
    return cfg


def _default_jobs() -> int:
    raw = os.environ.get("SESS_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer SESS_JOBS=%r", raw)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sess", description="Saliency map enhancement by superpixel similarity.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance one saliency map")
    p.add_argument("image", nargs="?", type=Path)
    p.add_argument("saliency", nargs="?", type=Path)
    p.add_argument("out", nargs="?", type=Path)
    p.add_argument("--dump-iterations", type=Path, metavar="DIR", help="write every iteration map and the integrated map")
    _add_config_args(p)

    p = sub.add_parser("batch", help="enhance every map of a dataset")
    p.add_argument("--images", type=Path, required=False)
    p.add_argument("--saliency", type=Path, required=False)
    p.add_argument("--out", type=Path, required=False)
    p.add_argument("--gt", type=Path, help="ground-truth dir; also writes metrics.csv and pr.csv into --out")
    p.add_argument("-j", "--jobs", type=int, default=None, help="parallel images (default: $SESS_JOBS or 1)")
    _add_config_args(p)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("pred_dir", type=Path)
    p.add_argument("gt_dir", type=Path)
    p.add_argument("--report", type=Path, default=Path("metrics.csv"), help="per-image metrics CSV")
    p.add_argument("--pr", type=Path, default=Path("pr.csv"), help="mean precision/recall CSV")
    return parser


def cmd_enhance(args) -> int:
    cfg = _resolve_config(args)
    if args.print_config:
        sys.stdout.write(format_config(cfg))
        return 0
    if args.image is None or args.saliency is None or args.out is None:
        log.error("enhance needs IMAGE SALIENCY OUT")
        return 2
    harness.enhance_file(args.image, args.saliency, args.out, cfg, args.dump_iterations)
    log.info("wrote %s", args.out)
    return 0


def _write_eval(result: harness.EvalResult, report: Path, pr: Path) -> None:
    harness.write_report_csv(result, report)
    harness.write_pr_csv(result, pr)
    mean = result.mean()
    print(
        f"evaluated {len(result.rows)} images, skipped {len(result.skipped)}: "
        + " ".join(f"{k}={v:.4f}" for k, v in mean.items())
    )
    for stem, why in result.skipped:
        print(f"skipped {stem}: {why}", file=sys.stderr)


def cmd_batch(args) -> int:
    cfg = _resolve_config(args)
    if args.print_config:
        sys.stdout.write(format_config(cfg))
        return 0
    if args.images is None or args.saliency is None or args.out is None:
        log.error("batch needs --images, --saliency and --out")
        return 2
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    layout = harness.DatasetLayout(args.images, args.saliency, args.out, args.gt)
    processed, failures = harness.run_batch(layout, cfg, jobs)
    print(f"processed {processed}, failed {len(failures)}")
    if failures:
        log.warning("%d image(s) failed", len(failures))
    if args.gt is not None:
        result = harness.evaluate_dirs(args.out, args.gt)
        _write_eval(result, args.out / "metrics.csv", args.out / "pr.csv")
    return 0


def cmd_eval(args) -> int:
    result = harness.evaluate_dirs(args.pred_dir, args.gt_dir)
    _write_eval(result, args.report, args.pr)
    return 0


COMMANDS = {"enhance": cmd_enhance, "batch": cmd_batch, "eval": cmd_eval}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, harness.NoPairsError, FileNotFoundError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
