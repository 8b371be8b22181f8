"""End-to-end batch processing and pairwise scanpath comparison."""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import PipelineConfig
from .events import detect_blinks, detect_idt, detect_ivt, summarize_events
from .ingest import ExclusionFlags, apply_exclusion_rules, parse_recording
from .io import atomic_write_bytes, atomic_write_text, format_events, format_tokens, read_scanpath, read_tokens
from .model import Scanpath
from .preprocess import clean_recording
from .scanpath import (
    EncodedScanpath, RoiGrid, SubstitutionMatrix, distance_substitution_matrix, encode, eyenalysis,
    fit_percentile_grid, hamming, histogram_distance, ngram_histogram, regular_grid, scanmatch_score,
)
from .viz import render_scanpath, saliency_map, to_pgm, to_ppm

log = logging.getLogger("gazekit")

METHODS = ("hamming", "scanmatch", "eyenalysis", "ngram")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _dedupe(names):
    out, seen = [], {}
    for name in names:
        k = seen.get(name, 0)
        seen[name] = k + 1
        out.append(name if k == 0 else f"{name}_{k + 1}")
    return out


def _unique_names(inputs):
    return _dedupe([Path(p).stem or "input" for p in inputs])


def _pair_ids(inputs):
    """Row/column ids: file stems, or ``parent/stem`` when stems collide."""
    stems = [Path(p).stem for p in inputs]
    if len(set(stems)) < len(stems):
        stems = [f"{Path(p).parent.name}/{Path(p).stem}" if Path(p).parent.name else Path(p).stem for p in inputs]
    return _dedupe(stems)


def build_grid(spec, fixations, stimulus) -> RoiGrid:
    w, h = stimulus
    if spec.scheme == "percentile":
        pts = [(f.centroid_x, f.centroid_y) for f in fixations]
        return fit_percentile_grid(pts, spec.cols, spec.rows, w, h)
    return regular_grid(spec.cols, spec.rows, w, h)


def process_file(cfg: PipelineConfig, path, out_dir: Path) -> dict:
    """Run one input through every stage; returns its manifest entry."""
    name = out_dir.name
    entry = {"input": str(path), "name": name, "status": "failed", "outputs": {}}
    try:
        rec = parse_recording(path, cfg.mapping, cfg.eye_policy)
    except (OSError, ValueError, UnicodeDecodeError) as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
        log.error("%s: %s", path, entry["error"])
        return entry

    base = Path(path).name
    flags = ExclusionFlags(bad_calibration=base in cfg.bad_calibration, invalid_trial=base in cfg.invalid_trial)
    report = apply_exclusion_rules(rec, cfg.min_tracking_ratio, flags, cfg.eye_policy)
    entry["report"] = report.to_dict()
    outputs = entry["outputs"]

    def emit(kind, filename, payload):
        target = out_dir / filename
        if isinstance(payload, bytes):
            atomic_write_bytes(target, payload)
        else:
            atomic_write_text(target, payload)
        outputs[kind] = f"{name}/{filename}"

    emit("report", "report.json", _dump_json(report.to_dict()))
    if report.excluded:
        entry["status"] = "excluded"
        log.info("%s: excluded (%s)", path, report.exclusion_reason.value)
        return entry

    try:
        blinks = detect_blinks(rec, cfg.blink_min_ms, cfg.blink_max_ms, cfg.eye_policy)
        cleaned = clean_recording(rec, cfg.clean, cfg.eye_policy)
        if cfg.detector == "ivt":
            fixations, saccades = detect_ivt(cleaned, cfg.ivt, cfg.eye_policy)
        else:
            fixations, saccades = detect_idt(cleaned, cfg.idt, cfg.eye_policy), []
        emit("events", "events.csv", format_events(fixations, saccades, blinks))
        summary = summarize_events(fixations, saccades).to_dict()
        summary["blink_count"] = len(blinks)
        summary["units"] = "deg" if rec.geometry is not None else "px"
        emit("summary", "summary.json", _dump_json(summary))

        stimulus = cfg.stimulus_size(rec.geometry)
        sp = Scanpath(tuple(fixations), stimulus_id=name)
        if cfg.roi is not None and fixations and stimulus:
            grid = build_grid(cfg.roi, fixations, stimulus)
            enc = encode(sp, grid, cfg.roi.bin_ms)
            emit("tokens", "scanpath.tokens", format_tokens(enc.tokens, enc.bin_ms))
        if cfg.saliency is not None and stimulus:
            smap = saliency_map(fixations, stimulus, cfg.saliency)
            emit("saliency_gray", "saliency.pgm", to_pgm(smap, binary=cfg.saliency_binary))
            emit("saliency_color", "saliency.ppm", to_ppm(smap, binary=cfg.saliency_binary))
        if cfg.render is not None and fixations and stimulus:
            emit("scanpath_svg", "scanpath.svg",
                 render_scanpath(sp, stimulus, cfg.render.radius_scale, cfg.render.show_duration_dots))
    except (ValueError, KeyError) as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
        log.error("%s: %s", path, entry["error"])
        return entry
    entry["status"] = "ok"
    entry["counts"] = {"fixations": len(fixations), "saccades": len(saccades), "blinks": len(blinks)}
    log.info("%s: %d fixations, %d saccades, %d blinks", path, len(fixations), len(saccades), len(blinks))
    return entry


def run_pipeline(cfg: PipelineConfig, inputs: Sequence, jobs: int = 1, out_dir=None) -> dict:
    """Process every input and write ``manifest.json`` into the output directory.

    A failing input is recorded and never affects the others. The manifest
    is assembled in input order once all workers finish; only its
    ``created`` field varies between identical runs.
    """
    if not inputs:
        raise ValueError("run_pipeline needs at least one input")
    root = Path(out_dir or cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    names = _unique_names(inputs)
    tasks = [(p, root / n) for p, n in zip(inputs, names)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(lambda a: process_file(cfg, *a), tasks))
    else:
        entries = [process_file(cfg, p, d) for p, d in tasks]
    counts = {s: sum(e["status"] == s for e in entries) for s in ("ok", "excluded", "failed")}
    manifest = {
        "tool": "gazekit",
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "files": entries,
        "summary": counts,
    }
    atomic_write_text(root / "manifest.json", _dump_json(manifest))
    return manifest


def manifest_exit_code(manifest: dict) -> int:
    return 1 if manifest["summary"]["failed"] else 0


def _load_item(path, method, grid: Optional[RoiGrid], bin_ms):
    p = Path(path)
    if p.suffix in (".tokens", ".txt"):
        if method == "eyenalysis":
            raise ValueError(f"{p}: eyenalysis needs fixation coordinates, not tokens")
        tokens, file_bin = read_tokens(p)
        return EncodedScanpath(tokens, file_bin if file_bin is not None else bin_ms)
    sp = read_scanpath(p)
    if method == "eyenalysis":
        return sp
    if grid is None:
        raise ValueError(f"{p}: encoding event tables needs a grid (--grid and stimulus size)")
    return encode(sp, grid, bin_ms)


def compare_matrix(items, method: str, *, substitution: Optional[SubstitutionMatrix] = None,
                   gap_penalty: Optional[float] = None, n: int = 2):
    """Symmetric pairwise matrix; entries are None where a pair is undefined."""
    if method not in METHODS:
        raise ValueError(f"unknown comparison method {method!r}")
    k = len(items)
    out = [[None] * k for _ in range(k)]
    hists = {}
    for i in range(k):
        for j in range(i, k):
            a, b = items[i], items[j]
            try:
                if method == "hamming":
                    v = float(hamming(a, b))
                elif method == "scanmatch":
                    v = scanmatch_score(a, b, substitution, gap_penalty)
                elif method == "eyenalysis":
                    v = eyenalysis(a, b)
                elif method == "ngram":
                    for idx in (i, j):
                        if idx not in hists:
                            hists[idx] = ngram_histogram(items[idx], n)
                    v = histogram_distance(hists[i], hists[j])
            except (ValueError, KeyError) as exc:
                log.warning("pair (%d, %d): %s", i, j, exc)
                v = None
            out[i][j] = out[j][i] = v
    return out


def format_matrix(ids, matrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", *ids])
    for ident, row in zip(ids, matrix):
        w.writerow([ident, *("" if v is None else repr(float(v)) for v in row)])
    return buf.getvalue()


def compare_command(inputs: Sequence, method: str, out_path=None, *, grid: Optional[RoiGrid] = None,
                    bin_ms: Optional[float] = None, substitution: Optional[SubstitutionMatrix] = None,
                    gap_penalty: Optional[float] = None, n: int = 2):
    """Compare every pair of scanpath files and optionally write the matrix.

    Event tables (``.csv``) are encoded with ``grid`` for string methods;
    token files (``.tokens``) are used as they are. Returns ``(ids, matrix)``.
    """
    if len(inputs) < 2:
        raise ValueError("compare needs at least two inputs")
    if method not in METHODS:
        raise ValueError(f"unknown comparison method {method!r}")
    items = [_load_item(p, method, grid, bin_ms) for p in inputs]
    if method == "scanmatch" and substitution is None:
        if grid is None:
            raise ValueError("scanmatch needs a substitution matrix file or a grid")
        substitution = distance_substitution_matrix(grid, gap_penalty=gap_penalty or 0.0)
    ids = _pair_ids(inputs)
    matrix = compare_matrix(items, method, substitution=substitution, gap_penalty=gap_penalty, n=n)
    if out_path is not None:
        atomic_write_text(out_path, format_matrix(ids, matrix))
    return ids, matrix
