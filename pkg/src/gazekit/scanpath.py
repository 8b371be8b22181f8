"""Scanpath string encoding and pairwise comparison.

Grid cells are labelled by a lowercase row name followed by an uppercase
column name, so the top-left cell of a grid is ``"aA"`` and the cell in
the second row, fourth column is ``"bD"``. Names continue past 26 in the
spreadsheet manner (``z``, ``aa``, ``ab``...). Tokens, not characters, are
the unit every comparison works on.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .model import Scanpath


def _alpha(k: int) -> str:
    name = ""
    k += 1
    while k:
        k, rem = divmod(k - 1, 26)
        name = chr(ord("a") + rem) + name
    return name


def cell_label(row: int, col: int) -> str:
    return _alpha(row) + _alpha(col).upper()


@dataclass(frozen=True)
class RoiGrid:
    """Rectangular ROI grid over a ``width`` x ``height`` pixel stimulus.

    ``x_edges``/``y_edges`` hold the interior boundaries; cells are
    half-open on the right/bottom.
    """

    cols: int
    rows: int
    width: float
    height: float
    scheme: str = "regular"
    x_edges: tuple = ()
    y_edges: tuple = ()

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid needs at least one column and one row")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("stimulus bounds must be positive")
        if self.scheme == "regular":
            object.__setattr__(self, "x_edges", tuple(self.width * i / self.cols for i in range(1, self.cols)))
            object.__setattr__(self, "y_edges", tuple(self.height * j / self.rows for j in range(1, self.rows)))
        elif self.scheme == "percentile":
            if len(self.x_edges) != self.cols - 1 or len(self.y_edges) != self.rows - 1:
                raise ValueError("a percentile grid must be built with fit_percentile_grid")
        else:
            raise ValueError(f"unknown grid scheme {self.scheme!r}")

    @property
    def labels(self) -> tuple:
        return tuple(cell_label(r, c) for r in range(self.rows) for c in range(self.cols))

    def locate(self, x: float, y: float):
        """(row, col, clamped) of the cell holding a point."""
        clamped = not (0 <= x < self.width and 0 <= y < self.height)
        col = int(np.searchsorted(self.x_edges, x, side="right"))
        row = int(np.searchsorted(self.y_edges, y, side="right"))
        return row, col, clamped

    def label_of(self, x: float, y: float) -> str:
        row, col, _ = self.locate(x, y)
        return cell_label(row, col)

    def cell_centers(self) -> np.ndarray:
        """(x, y) centre of every cell in label order."""
        xb = np.concatenate([[0.0], self.x_edges, [self.width]])
        yb = np.concatenate([[0.0], self.y_edges, [self.height]])
        xc = (np.clip(xb[:-1], 0, self.width) + np.clip(xb[1:], 0, self.width)) / 2
        yc = (np.clip(yb[:-1], 0, self.height) + np.clip(yb[1:], 0, self.height)) / 2
        return np.array([(xc[c], yc[r]) for r in range(self.rows) for c in range(self.cols)])


def regular_grid(cols: int, rows: int, width: float, height: float) -> RoiGrid:
    return RoiGrid(cols, rows, width, height, "regular")


def fit_percentile_grid(points, cols: int, rows: int, width: float, height: float) -> RoiGrid:
    """Grid whose column (row) boundaries sit at the x (y) percentiles of ``points``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("a percentile grid needs at least one point")
    if len(pts) < cols * rows:
        warnings.warn(f"only {len(pts)} points for {cols * rows} percentile cells", stacklevel=2)
    xe = tuple(float(v) for v in np.percentile(pts[:, 0], [100.0 * i / cols for i in range(1, cols)]))
    ye = tuple(float(v) for v in np.percentile(pts[:, 1], [100.0 * j / rows for j in range(1, rows)]))
    if np.ptp(pts[:, 0]) == 0 and np.ptp(pts[:, 1]) == 0 and cols * rows > 1:
        warnings.warn("all points coincide; the percentile grid has a single effective cell", stacklevel=2)
    return RoiGrid(cols, rows, width, height, "percentile", xe, ye)


@dataclass(frozen=True)
class EncodedScanpath:
    tokens: tuple
    bin_ms: Optional[float] = None

    def __len__(self):
        return len(self.tokens)

    def __str__(self):
        return "".join(self.tokens)


def _bins(duration_us: int, bin_ms: float) -> int:
    bin_us = bin_ms * 1000.0
    if float(bin_us).is_integer():
        return max(1, -(-int(duration_us) // int(bin_us)))
    return max(1, math.ceil(duration_us / bin_us))


def encode(sp: Scanpath, grid: RoiGrid, bin_ms: Optional[float] = None) -> EncodedScanpath:
    """One token per fixation, or ``ceil(duration / bin_ms)`` tokens with temporal binning."""
    if bin_ms is not None and not bin_ms > 0:
        raise ValueError("bin_ms must be positive")
    tokens = []
    clamped = 0
    for f in sp.fixations:
        row, col, off = grid.locate(f.centroid_x, f.centroid_y)
        clamped += off
        label = cell_label(row, col)
        tokens.extend([label] * (1 if bin_ms is None else _bins(f.duration, bin_ms)))
    if clamped:
        warnings.warn(f"{clamped} fixation(s) outside the stimulus were clamped to edge cells", stacklevel=2)
    return EncodedScanpath(tuple(tokens), bin_ms)


def _tokens(e) -> tuple:
    return tuple(e.tokens) if isinstance(e, EncodedScanpath) else tuple(e)


def hamming(a, b) -> int:
    a, b = _tokens(a), _tokens(b)
    if len(a) != len(b):
        raise ValueError(f"Hamming distance requires equal lengths, got {len(a)} and {len(b)}")
    return sum(x != y for x, y in zip(a, b))


@dataclass(frozen=True)
class SubstitutionMatrix:
    """Square score table over ROI labels; higher means more similar in similarity mode."""

    labels: tuple
    scores: np.ndarray
    gap_penalty: float = 0.0

    def __post_init__(self):
        labels = tuple(self.labels)
        scores = np.array(self.scores, dtype=float)
        if scores.shape != (len(labels), len(labels)):
            raise ValueError(f"score table shape {scores.shape} does not match {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in substitution matrix")
        scores.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    def codes(self, tokens) -> np.ndarray:
        try:
            return np.array([self._index[t] for t in tokens], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"token {exc.args[0]!r} is not in the substitution matrix") from None

    def score(self, a: str, b: str) -> float:
        return float(self.scores[self._index[a], self._index[b]])

    @property
    def max_score(self) -> float:
        return float(self.scores.max())

    def to_text(self, delimiter: str = ",") -> str:
        out = io.StringIO()
        w = csv.writer(out, delimiter=delimiter, lineterminator="\n")
        w.writerow(["label", *self.labels])
        for lab, row in zip(self.labels, self.scores):
            w.writerow([lab, *(repr(float(v)) for v in row)])
        w.writerow(["gap_penalty", repr(float(self.gap_penalty))])
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str, delimiter: str = ",") -> "SubstitutionMatrix":
        rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if r and any(c.strip() for c in r)]
        header = [c.strip() for c in rows[0][1:]]
        gap = 0.0
        body = []
        for r in rows[1:]:
            key = r[0].strip()
            if key == "gap_penalty":
                gap = float(r[1])
                continue
            body.append((key, [float(c) for c in r[1:]]))
        if [k for k, _ in body] != header:
            raise ValueError("row labels must repeat the header labels in the same order")
        return cls(tuple(header), np.array([v for _, v in body]), gap)

    @classmethod
    def load(cls, path, delimiter: str = ",") -> "SubstitutionMatrix":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), delimiter)


def distance_substitution_matrix(grid: RoiGrid, max_score: float = 1.0, gap_penalty: float = 0.0,
                                 cutoff: Optional[float] = None) -> SubstitutionMatrix:
    """Scores falling linearly with cell-centre distance.

    ``score = max_score * (1 - distance / cutoff)`` so identical cells score
    ``max_score`` and cells farther apart than ``cutoff`` (default: half the
    stimulus diagonal) score negative.
    """
    if cutoff is None:
        cutoff = math.hypot(grid.width, grid.height) / 2.0
    c = grid.cell_centers()
    d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
    return SubstitutionMatrix(grid.labels, max_score * (1.0 - d / cutoff), gap_penalty)


def unit_cost_matrix(labels) -> SubstitutionMatrix:
    """0 on the diagonal, 1 elsewhere: cost-mode alignment then equals edit distance."""
    labels = tuple(labels)
    return SubstitutionMatrix(labels, 1.0 - np.eye(len(labels)))


@dataclass(frozen=True)
class Alignment:
    score: float
    a: tuple  # aligned tokens of the first sequence, None for gaps
    b: tuple


def align_nw(a, b, S: SubstitutionMatrix, mode: str = "similarity_max", *,
             gap_penalty: Optional[float] = None, c_ins: float = 1.0, c_del: float = 1.0) -> Alignment:
    """Global Needleman-Wunsch alignment.

    ``cost_min`` minimises ``S`` entries plus ``c_del`` per token of ``a``
    against a gap and ``c_ins`` per token of ``b`` against a gap.
    ``similarity_max`` maximises ``S`` entries plus ``gap_penalty`` (default
    ``S.gap_penalty``) per gap. One optimal alignment is traced back,
    preferring diagonal, then up, then left moves on ties.
    """
    a, b = _tokens(a), _tokens(b)
    if mode == "cost_min":
        d, ins, maximize = float(c_del), float(c_ins), False
    elif mode == "similarity_max":
        if not a or not b:
            raise ValueError("similarity alignment needs two non-empty sequences")
        g = S.gap_penalty if gap_penalty is None else gap_penalty
        d = ins = float(g)
        maximize = True
    else:
        raise ValueError(f"unknown alignment mode {mode!r}")
    ca, cb = S.codes(a), S.codes(b)
    dp = kernels.nw_fill(ca, cb, S.scores, d, ins, maximize)
    i, j = len(a), len(b)
    out_a, out_b = [], []
    sc = S.scores
    while i > 0 or j > 0:
        here = dp[i, j]
        if i > 0 and j > 0 and here == dp[i - 1, j - 1] + sc[ca[i - 1], cb[j - 1]]:
            out_a.append(a[i - 1])
            out_b.append(b[j - 1])
            i, j = i - 1, j - 1
        elif i > 0 and here == dp[i - 1, j] + d:
            out_a.append(a[i - 1])
            out_b.append(None)
            i -= 1
        else:
            out_a.append(None)
            out_b.append(b[j - 1])
            j -= 1
    return Alignment(float(dp[len(a), len(b)]), tuple(reversed(out_a)), tuple(reversed(out_b)))


def scanmatch_score(a, b, S: SubstitutionMatrix, gap_penalty: Optional[float] = None) -> float:
    """Similarity-mode alignment score over ``max(S) * longest length``."""
    top = S.max_score
    if top <= 0:
        raise ValueError("normalisation needs a positive maximum substitution score")
    g = S.gap_penalty if gap_penalty is None else gap_penalty
    if g > 0:
        warnings.warn("positive gap penalty: normalised scores may exceed their usual range", stacklevel=2)
    a, b = _tokens(a), _tokens(b)
    raw = align_nw(a, b, S, "similarity_max", gap_penalty=g).score
    return raw / (top * max(len(a), len(b)))


def _nearest(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    d = np.sqrt(((src[:, None, :] - dst[None, :, :]) ** 2).sum(axis=2))
    return d[np.arange(len(src)), np.argmin(d, axis=1)]


def eyenalysis(S, T) -> float:
    """Double-mapping distance between two point sequences.

    Each point of one scanpath maps to its nearest point in the other (first
    index on ties), in both directions; the mapping distances are summed and
    divided by the longer length. Accepts :class:`Scanpath` (x, y) or arrays
    of shape (n, d).
    """
    s = S.points() if isinstance(S, Scanpath) else np.asarray(S, dtype=float)
    t = T.points() if isinstance(T, Scanpath) else np.asarray(T, dtype=float)
    if s.ndim != 2 or t.ndim != 2 or len(s) == 0 or len(t) == 0:
        raise ValueError("both scanpaths must be non-empty 2-D point arrays")
    if s.shape[1] != t.shape[1]:
        raise ValueError(f"dimension mismatch: {s.shape[1]} vs {t.shape[1]}")
    total = float(_nearest(s, t).sum()) + float(_nearest(t, s).sum())
    return total / max(len(s), len(t))


def ngram_histogram(e, n: int) -> dict:
    """Relative frequencies of the length-``n`` token windows, keyed by token tuples."""
    tokens = _tokens(e)
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(tokens) < n:
        raise ValueError(f"sequence of {len(tokens)} tokens is shorter than n={n}")
    counts = Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    total = sum(counts.values())
    return {k: counts[k] / total for k in sorted(counts)}


def histogram_distance(h1: dict, h2: dict) -> float:
    """Total variation distance between two normalised histograms."""
    for h in (h1, h2):
        if abs(math.fsum(h.values()) - 1.0) > 1e-9:
            raise ValueError("histograms must sum to 1")
    keys = set(h1) | set(h2)
    d = 0.5 * math.fsum(abs(h1.get(k, 0.0) - h2.get(k, 0.0)) for k in keys)
    return min(1.0, max(0.0, d))
