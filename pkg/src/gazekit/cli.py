"""Command-line interface.

Every stage reads and writes the documented text formats, so stages can be
chained through files::

    gazekit ingest raw.tsv -o rec.csv
    gazekit clean rec.csv -o clean.csv
    gazekit detect clean.csv -o events.csv
    gazekit encode events.csv -o path.tokens --cols 4 --rows 2

Exit codes: 0 success, 1 partial per-file failure, 2 config or usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, load_config, read_config
from .events import detect_blinks, detect_idt, detect_ivt, summarize_events
from .ingest import ExclusionFlags, apply_exclusion_rules, format_normalized, parse_recording, read_normalized
from .io import atomic_write_bytes, atomic_write_text, format_events, format_tokens, read_events, read_scanpath
from .pipeline import METHODS, compare_command, format_matrix, manifest_exit_code, run_pipeline
from .preprocess import clean_recording
from .scanpath import RoiGrid, SubstitutionMatrix, encode, fit_percentile_grid, regular_grid
from .synth import generate, trace_spec_from_config
from .viz import render_gaze_plot, render_scanpath, saliency_map, to_pgm, to_ppm

log = logging.getLogger("gazekit")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _write(path, payload):
    if path is None or str(path) == "-":
        if isinstance(payload, bytes):
            sys.stdout.buffer.write(payload)
        else:
            sys.stdout.write(payload)
    elif isinstance(payload, bytes):
        atomic_write_bytes(path, payload)
    else:
        atomic_write_text(path, payload)


def _config(args) -> PipelineConfig:
    return load_config(args.config, args.set)


def _stimulus(args, cfg: PipelineConfig, geometry=None):
    if args.width is not None or args.height is not None:
        if args.width is None or args.height is None:
            raise UsageError("--width and --height go together")
        return (args.width, args.height)
    size = cfg.stimulus_size(geometry)
    if size is None:
        raise UsageError("stimulus size unknown: pass --width/--height or configure [stimulus] or [geometry]")
    return size


def cmd_ingest(args):
    cfg = _config(args)
    rec = parse_recording(args.input, cfg.mapping, cfg.eye_policy)
    name = Path(args.input).name
    flags = ExclusionFlags(name in cfg.bad_calibration, name in cfg.invalid_trial)
    report = apply_exclusion_rules(rec, cfg.min_tracking_ratio, flags, cfg.eye_policy)
    _write(args.output, format_normalized(rec))
    if args.report:
        atomic_write_text(args.report, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    log.info("%s: %d samples, tracking ratio %.3f%s", args.input, len(rec), report.tracking_ratio,
             f", excluded ({report.exclusion_reason.value})" if report.excluded else "")
    return EXIT_OK


def cmd_clean(args):
    cfg = _config(args)
    rec = read_normalized(args.input)
    _write(args.output, format_normalized(clean_recording(rec, cfg.clean, cfg.eye_policy)))
    return EXIT_OK


def cmd_detect(args):
    cfg = _config(args)
    rec = read_normalized(args.input)
    blinks = detect_blinks(rec, cfg.blink_min_ms, cfg.blink_max_ms, cfg.eye_policy)
    if cfg.detector == "ivt":
        fixations, saccades = detect_ivt(rec, cfg.ivt, cfg.eye_policy)
    else:
        fixations, saccades = detect_idt(rec, cfg.idt, cfg.eye_policy), []
    _write(args.output, format_events(fixations, saccades, blinks))
    log.info("%s: %d fixations, %d saccades, %d blinks", args.input, len(fixations), len(saccades), len(blinks))
    return EXIT_OK


def cmd_stats(args):
    fixations, saccades, blinks = read_events(args.input)
    summary = summarize_events(fixations, saccades).to_dict()
    summary["blink_count"] = len(blinks)
    _write(args.output, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _grid(args, cfg, fixations) -> RoiGrid:
    stimulus = _stimulus(args, cfg)
    cols = args.cols if args.cols is not None else (cfg.roi.cols if cfg.roi else 4)
    rows = args.rows if args.rows is not None else (cfg.roi.rows if cfg.roi else 2)
    scheme = args.scheme or (cfg.roi.scheme if cfg.roi else "regular")
    if scheme == "percentile":
        return fit_percentile_grid([(f.centroid_x, f.centroid_y) for f in fixations], cols, rows, *stimulus)
    return regular_grid(cols, rows, *stimulus)


def cmd_encode(args):
    cfg = _config(args)
    sp = read_scanpath(args.input)
    bin_ms = args.bin_ms if args.bin_ms is not None else (cfg.roi.bin_ms if cfg.roi else None)
    enc = encode(sp, _grid(args, cfg, sp.fixations), bin_ms)
    _write(args.output, format_tokens(enc.tokens, enc.bin_ms))
    return EXIT_OK


def cmd_compare(args):
    cfg = _config(args)
    grid = None
    if args.method != "eyenalysis" and any(Path(p).suffix == ".csv" for p in args.inputs):
        if (args.scheme or (cfg.roi.scheme if cfg.roi else "regular")) == "percentile":
            raise UsageError("compare encodes all inputs on one grid; percentile grids are fitted per recording, "
                             "encode each file first")
        grid = _grid(args, cfg, ())
    elif args.method == "scanmatch" and args.substitution is None:
        grid = _grid(args, cfg, ())
    substitution = SubstitutionMatrix.load(args.substitution) if args.substitution else None
    bin_ms = args.bin_ms if args.bin_ms is not None else (cfg.roi.bin_ms if cfg.roi else None)
    ids, matrix = compare_command(args.inputs, args.method, None, grid=grid, bin_ms=bin_ms,
                                  substitution=substitution, gap_penalty=args.gap_penalty, n=args.n)
    _write(args.output, format_matrix(ids, matrix))
    return EXIT_OK


def cmd_saliency(args):
    cfg = _config(args)
    if cfg.saliency is None:
        raise UsageError("saliency is disabled; set [saliency] enabled=true (e.g. --set saliency.enabled=true)")
    fixations, _, _ = read_events(args.input)
    smap = saliency_map(fixations, _stimulus(args, cfg), cfg.saliency)
    binary = cfg.saliency_binary
    _write(args.output, to_ppm(smap, binary) if args.color else to_pgm(smap, binary))
    return EXIT_OK


def cmd_render(args):
    cfg = _config(args)
    sp = read_scanpath(args.input)
    spec = cfg.render
    scale = args.radius_scale if args.radius_scale is not None else (spec.radius_scale if spec else 1.0)
    stimulus = _stimulus(args, cfg)
    if args.window:
        svg = render_gaze_plot(sp, tuple(args.window), stimulus, scale)
    else:
        svg = render_scanpath(sp, stimulus, scale, spec.show_duration_dots if spec else True)
    _write(args.output, svg)
    return EXIT_OK


def cmd_run(args):
    cfg = _config(args)
    manifest = run_pipeline(cfg, args.inputs, jobs=args.jobs, out_dir=args.output)
    s = manifest["summary"]
    log.info("done: %d ok, %d excluded, %d failed", s["ok"], s["excluded"], s["failed"])
    return manifest_exit_code(manifest)


def cmd_synth(args):
    parser = read_config(args.config, args.set)
    if not parser.has_section("trace"):
        raise UsageError("synth needs a [trace] section (segments, sampling_rate_hz, noise_sigma_deg, seed)")
    rec, truth = generate(trace_spec_from_config(parser))
    _write(args.output, format_normalized(rec))
    if args.truth:
        rows = [dataclasses.asdict(ev) for ev in truth]
        atomic_write_text(args.truth, json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def _add_stimulus(p):
    p.add_argument("--width", type=int, help="stimulus width in pixels")
    p.add_argument("--height", type=int, help="stimulus height in pixels")


def _add_grid(p):
    _add_stimulus(p)
    p.add_argument("--cols", type=int, help="grid columns (default: [roi] cols, else 4)")
    p.add_argument("--rows", type=int, help="grid rows (default: [roi] rows, else 2)")
    p.add_argument("--scheme", choices=("regular", "percentile"), help="grid layout")
    p.add_argument("--bin-ms", type=float, help="emit one token per started bin of this many ms")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI config file (default: $GAZEKIT_CONFIG)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    ap = argparse.ArgumentParser(prog="gazekit", description="Eye-tracking data analysis pipeline.")
    ap.add_argument("--version", action="version", version=f"gazekit {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "parse a raw tracker log into the normalized format")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="normalized recording (default: stdout)")
    p.add_argument("--report", help="write the ingest report (JSON) here")

    p = add("clean", cmd_clean, "interpolate gaps and smooth a normalized recording")
    p.add_argument("input")
    p.add_argument("-o", "--output")

    p = add("detect", cmd_detect, "detect fixations, saccades and blinks into an events table")
    p.add_argument("input")
    p.add_argument("-o", "--output")

    p = add("stats", cmd_stats, "summary statistics (JSON) of an events table")
    p.add_argument("input")
    p.add_argument("-o", "--output")

    p = add("encode", cmd_encode, "encode an events table as an ROI token string")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    _add_grid(p)

    p = add("compare", cmd_compare, "pairwise scanpath comparison matrix (CSV)")
    p.add_argument("inputs", nargs="+", help="events tables (.csv) or token files (.tokens)")
    p.add_argument("-m", "--method", required=True, choices=METHODS)
    p.add_argument("-o", "--output")
    p.add_argument("--substitution", help="substitution matrix file for scanmatch")
    p.add_argument("--gap-penalty", type=float, help="scanmatch gap penalty (default: from the matrix)")
    p.add_argument("-n", type=int, default=2, help="n-gram length (default 2)")
    _add_grid(p)

    p = add("saliency", cmd_saliency, "fixation saliency map as netpbm")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--color", action="store_true", help="colour PPM through the heat table instead of PGM")
    _add_stimulus(p)

    p = add("render", cmd_render, "scanpath or gaze-plot SVG")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--window", nargs=2, type=int, metavar=("START_US", "END_US"),
                   help="gaze plot of fixations with onset in [START_US, END_US)")
    p.add_argument("--radius-scale", type=float)
    _add_stimulus(p)

    p = add("run", cmd_run, "full pipeline over many inputs with a manifest")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", help="output directory (default: [output] directory)")
    p.add_argument("-j", "--jobs", type=int, default=1, help="files processed concurrently")

    p = add("synth", cmd_synth, "synthesise a recording from a [trace] config section")
    p.add_argument("-o", "--output")
    p.add_argument("--truth", help="write ground-truth events (JSON) here")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="gazekit: %(levelname)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    if getattr(args, "jobs", 1) < 1:
        ap.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
