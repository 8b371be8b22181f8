import json
import math
import shutil

import numpy as np
import pytest

from conftest import CORPUS, DATA
from gazekit.config import load_config
from gazekit.events import detect_blinks, detect_ivt
from gazekit.ingest import parse_recording
from gazekit.io import format_events, format_tokens, read_scanpath
from gazekit.model import Fixation, Scanpath
from gazekit.pipeline import compare_command, format_matrix, manifest_exit_code, run_pipeline
from gazekit.preprocess import clean_recording
from gazekit.scanpath import (
    distance_substitution_matrix, encode, eyenalysis, hamming, histogram_distance, ngram_histogram, regular_grid,
    scanmatch_score,
)

CORPUS_FILES = sorted(CORPUS.glob("*.csv"))


@pytest.fixture(scope="module")
def corpus_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = load_config(str(DATA / "corpus.ini"))
    manifest = run_pipeline(cfg, [str(p) for p in CORPUS_FILES], jobs=2, out_dir=out)
    return cfg, out, manifest


def _entry(manifest, name):
    (entry,) = [e for e in manifest["files"] if e["name"] == name]
    return entry


def test_manifest_shape(corpus_run):
    cfg, out, manifest = corpus_run
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk == manifest
    assert manifest["tool"] == "gazekit" and manifest["config_hash"] == cfg.config_hash()
    assert [e["name"] for e in manifest["files"]] == [p.stem for p in CORPUS_FILES]
    assert manifest["summary"] == {"ok": 3, "excluded": 1, "failed": 1}
    assert manifest_exit_code(manifest) == 1


def test_successful_outputs_exist(corpus_run):
    _, out, manifest = corpus_run
    entry = _entry(manifest, "p01")
    assert entry["status"] == "ok"
    assert set(entry["outputs"]) == {"report", "events", "summary", "tokens", "saliency_gray", "saliency_color",
                                     "scanpath_svg"}
    for rel in entry["outputs"].values():
        assert (out / rel).is_file()
    assert (out / "p01" / "saliency.pgm").read_bytes().startswith(b"P5\n1920 1080\n255\n")


def test_excluded_file_has_report_only(corpus_run):
    _, out, manifest = corpus_run
    entry = _entry(manifest, "low_tracking")
    assert entry["status"] == "excluded"
    assert entry["report"]["exclusion_reason"] == "low_tracking_ratio"
    assert entry["report"]["tracking_ratio"] < 0.75
    assert set(entry["outputs"]) == {"report"}
    assert not (out / "low_tracking" / "events.csv").exists()


def test_corrupt_file_recorded(corpus_run):
    _, out, manifest = corpus_run
    entry = _entry(manifest, "corrupt")
    assert entry["status"] == "failed" and entry["error"].startswith("SchemaError")
    assert entry["outputs"] == {}


def test_outputs_equal_direct_composition(corpus_run):
    cfg, out, _ = corpus_run
    path = CORPUS / "p02.csv"
    rec = parse_recording(path, cfg.mapping)
    blinks = detect_blinks(rec)
    fix, sac = detect_ivt(clean_recording(rec, cfg.clean), cfg.ivt)
    assert (out / "p02" / "events.csv").read_text() == format_events(fix, sac, blinks)
    grid = regular_grid(4, 2, 1920, 1080)
    enc = encode(Scanpath(tuple(fix)), grid, 50)
    assert (out / "p02" / "scanpath.tokens").read_text() == format_tokens(enc.tokens, 50.0)
    summary = json.loads((out / "p02" / "summary.json").read_text())
    assert summary["fixation_duration_ms"]["count"] == len(fix)
    assert summary["blink_count"] == len(blinks) and summary["units"] == "deg"


def test_partial_failure_does_not_change_others(corpus_run, tmp_path):
    cfg, out, _ = corpus_run
    alone = run_pipeline(cfg, [str(CORPUS / "p03.csv")], out_dir=tmp_path)
    assert manifest_exit_code(alone) == 0
    for f in ("events.csv", "summary.json", "scanpath.tokens", "saliency.ppm", "scanpath.svg"):
        assert (tmp_path / "p03" / f).read_bytes() == (out / "p03" / f).read_bytes()


def test_flagged_files_excluded(tmp_path):
    cfg = load_config(str(DATA / "corpus.ini"), ["exclusion.bad_calibration=p01.csv",
                                                 "exclusion.invalid_trial=p01.csv,p02.csv"])
    m = run_pipeline(cfg, [str(CORPUS / "p01.csv"), str(CORPUS / "p02.csv")], out_dir=tmp_path)
    reasons = [e["report"]["exclusion_reason"] for e in m["files"]]
    assert reasons == ["marked_bad_calibration", "marked_invalid_trial"]


def test_idt_and_percentile_run(tmp_path):
    cfg = load_config(str(DATA / "corpus.ini"), ["detect.detector=idt", "roi.scheme=percentile",
                                                 "roi.cols=2", "roi.rows=1", "saliency.enabled=false"])
    m = run_pipeline(cfg, [str(CORPUS / "p01.csv")], out_dir=tmp_path)
    entry = m["files"][0]
    assert entry["status"] == "ok" and entry["counts"]["saccades"] == 0
    assert "saliency_gray" not in entry["outputs"] and "tokens" in entry["outputs"]


def test_duplicate_stems_get_distinct_directories(tmp_path):
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        shutil.copy(CORPUS / "p01.csv", tmp_path / sub / "rec.csv")
    cfg = load_config(str(DATA / "corpus.ini"))
    m = run_pipeline(cfg, [str(tmp_path / "a" / "rec.csv"), str(tmp_path / "b" / "rec.csv")],
                     out_dir=tmp_path / "out")
    assert [e["name"] for e in m["files"]] == ["rec", "rec_2"]


def test_no_inputs():
    with pytest.raises(ValueError):
        run_pipeline(load_config(str(DATA / "corpus.ini")), [])


def _write_events(path, points, durations_ms=None):
    fix = []
    onset = 0
    for k, (x, y) in enumerate(points):
        d = 100_000 if durations_ms is None else durations_ms[k] * 1000
        fix.append(Fixation(float(x), float(y), onset, d))
        onset += d + 10_000
    path.write_text(format_events(fix))
    return path


def test_compare_identical_eyenalysis(tmp_path):
    a = _write_events(tmp_path / "a.csv", [(1, 2), (300, 400)])
    b = _write_events(tmp_path / "b.csv", [(1, 2), (300, 400)])
    ids, m = compare_command([a, b], "eyenalysis")
    assert ids == ["a", "b"] and m == [[0.0, 0.0], [0.0, 0.0]]


def test_compare_worked_pair(tmp_path):
    s = _write_events(tmp_path / "s.csv", [(0, 0), (1000, 0), (2000, 0), (2000, 60)])
    t = _write_events(tmp_path / "t.csv", [(30, 0), (1025, 0), (2010, 0), (2000, 30), (2000, 110)])
    out = tmp_path / "m.csv"
    _, m = compare_command([s, t], "eyenalysis", out)
    assert m[0][1] == 48.0
    assert out.read_text() == "id,s,t\ns,0.0,48.0\nt,48.0,0.0\n"


def test_compare_matches_direct_calls(tmp_path):
    rng = np.random.default_rng(31)
    grid = regular_grid(4, 2, 800, 400)
    S = distance_substitution_matrix(grid)
    paths = [_write_events(tmp_path / f"s{k}.csv", rng.uniform(0, 399, (int(rng.integers(2, 7)), 2)),
                           rng.integers(40, 300, 6).tolist()) for k in range(4)]
    sps = [read_scanpath(p) for p in paths]
    enc = [encode(sp, grid, 50) for sp in sps]
    direct = {
        "eyenalysis": lambda i, j: eyenalysis(sps[i], sps[j]),
        "scanmatch": lambda i, j: scanmatch_score(enc[i], enc[j], S),
        "ngram": lambda i, j: histogram_distance(ngram_histogram(enc[i], 2), ngram_histogram(enc[j], 2)),
    }
    for method, call in direct.items():
        _, m = compare_command(paths, method, grid=grid, bin_ms=50)
        for i in range(4):
            for j in range(4):
                assert m[i][j] == call(min(i, j), max(i, j))
                assert m[i][j] == m[j][i]
    _, m = compare_command(paths, "scanmatch", grid=grid, bin_ms=50)
    assert all(m[i][i] == pytest.approx(1.0) for i in range(4))


def test_compare_hamming_unequal_is_empty_cell(tmp_path):
    grid = regular_grid(2, 1, 100, 100)
    a = _write_events(tmp_path / "a.csv", [(10, 10), (60, 10)])
    b = _write_events(tmp_path / "b.csv", [(60, 10), (60, 10)])
    c = _write_events(tmp_path / "c.csv", [(10, 10)])
    ids, m = compare_command([a, b, c], "hamming", grid=grid)
    enc = [encode(read_scanpath(p), grid) for p in (a, b)]
    assert m[0][1] == hamming(*enc) == 1
    assert m[0][2] is None and m[2][2] == 0.0
    assert format_matrix(ids, m).splitlines()[1] == "a,0.0,1.0,"


def test_compare_token_files(tmp_path):
    (tmp_path / "x.tokens").write_text(format_tokens(["aA", "aB", "aA"], 50.0))
    (tmp_path / "y.tokens").write_text(format_tokens(["aA", "aA", "aA"], 50.0))
    _, m = compare_command([tmp_path / "x.tokens", tmp_path / "y.tokens"], "hamming")
    assert m[0][1] == 1.0
    with pytest.raises(ValueError):
        compare_command([tmp_path / "x.tokens", tmp_path / "y.tokens"], "eyenalysis")


def test_compare_argument_errors(tmp_path):
    a = _write_events(tmp_path / "a.csv", [(1, 2)])
    with pytest.raises(ValueError):
        compare_command([a], "hamming")
    with pytest.raises(ValueError):
        compare_command([a, a], "cosine")
    with pytest.raises(ValueError, match="grid"):
        compare_command([a, a], "hamming")


def test_ngram_short_sequences_are_empty_cells(tmp_path):
    grid = regular_grid(2, 1, 100, 100)
    a = _write_events(tmp_path / "a.csv", [(10, 10)])
    b = _write_events(tmp_path / "b.csv", [(10, 10), (60, 10), (10, 10)])
    _, m = compare_command([a, b], "ngram", grid=grid, n=2)
    assert m[0][0] is None and m[0][1] is None and m[1][1] == 0.0
    assert not math.isnan(m[1][1])
