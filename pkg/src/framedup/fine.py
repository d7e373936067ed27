"""Frame-level search and the coarse-to-fine detector.

Frame distances are ``(1 - cos) / 2``, computed as a quarter of the squared
distance between unit vectors so that identical embeddings give exactly 0.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .coarse import (
    MIN_FRAMES,
    CandidatePair,
    candidate_pairs,
    default_t1,
    plan_windows,
    sequence_distance_matrix,
)
from .config import RunConfig
from .embedder import embed_frames, embed_windows
from .errors import DegenerateGap, DimMismatch
from .media_io import EmbeddingSeries, VideoClip

log = logging.getLogger(__name__)

_CHUNK_PAIRS = 1 << 15


class Interval(NamedTuple):
    """Inclusive frame range."""

    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def frames(self) -> range:
        return range(self.start, self.end + 1)


# --------------------------------------------------------------------------- distances

def unit_rows(vectors: np.ndarray):
    """Normalise rows to unit length; returns ``(unit, is_zero)``."""
    v = np.asarray(vectors, dtype=np.float64)
    norms = np.sqrt((v * v).sum(axis=1))
    zero = norms == 0
    unit = np.divide(v, norms[:, None], out=np.zeros_like(v), where=~zero[:, None])
    return unit, zero


def pair_distances(ua: np.ndarray, za: np.ndarray, ub: np.ndarray, zb: np.ndarray) -> np.ndarray:
    """Row-by-row distances between two equally long stacks of unit vectors."""
    diff = ua - ub
    d = np.minimum((diff * diff).sum(axis=1) * 0.25, 1.0)
    d[za != zb] = 0.5  # cosine of a zero vector against anything else taken as 0
    d[za & zb] = 0.0
    return d


def frame_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)[None, :]
    b = np.asarray(b, dtype=np.float64)[None, :]
    if a.shape != b.shape:
        raise DimMismatch(f"vector dims differ: {a.shape[1]} vs {b.shape[1]}")
    ua, za = unit_rows(a)
    ub, zb = unit_rows(b)
    if za[0] and zb[0]:
        log.debug("frame_distance on two zero vectors; treated as identical")
    return float(pair_distances(ua, za, ub, zb)[0])


@dataclass
class FrameDistanceMatrix:
    """Distances between frames ``row_start..`` (rows) and ``col_start..`` (cols).

    ``valid`` marks cells eligible as the run minimum; NaN values are unknown.
    """

    values: np.ndarray
    row_start: int = 0
    col_start: int = 0
    valid: Optional[np.ndarray] = None

    @property
    def rows(self) -> range:
        return range(self.row_start, self.row_start + self.values.shape[0])

    @property
    def cols(self) -> range:
        return range(self.col_start, self.col_start + self.values.shape[1])

    def at(self, i: int, j: int) -> float:
        return float(self.values[i - self.row_start, j - self.col_start])


def _block(ua, za, ub, zb, min_offset: Optional[int] = None) -> np.ndarray:
    """Distances between every row of ``ua`` and every row of ``ub``.

    With ``min_offset`` (both stacks being the same clip) only cells with
    ``j - i >= min_offset`` are computed; the rest stay NaN.
    """
    n, m = len(ua), len(ub)
    out = np.full((n, m), np.nan)
    rows_per_chunk = max(1, _CHUNK_PAIRS // max(m * ua.shape[1] // 64, 1))
    for r0 in range(0, n, rows_per_chunk):
        r1 = min(n, r0 + rows_per_chunk)
        c0 = 0 if min_offset is None else min(m, max(0, r0 + min_offset))
        if c0 >= m:
            break
        diff = ua[r0:r1, None, :] - ub[None, c0:, :]
        d = np.minimum((diff * diff).sum(axis=2) * 0.25, 1.0)
        d[za[r0:r1, None] != zb[None, c0:]] = 0.5
        d[za[r0:r1, None] & zb[None, c0:]] = 0.0
        out[r0:r1, c0:] = d
    return out


def frame_distance_matrix(frames_a, frames_b, row_start: int = 0, col_start: int = 0) -> FrameDistanceMatrix:
    a = frames_a.vectors if isinstance(frames_a, EmbeddingSeries) else np.asarray(frames_a, dtype=np.float64)
    b = frames_b.vectors if isinstance(frames_b, EmbeddingSeries) else np.asarray(frames_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or len(a) == 0 or len(b) == 0:
        raise ValueError("frame slices must be non-empty 2-D blocks")
    if a.shape[1] != b.shape[1]:
        raise DimMismatch(f"embedding dims differ: {a.shape[1]} vs {b.shape[1]}")
    ua, za = unit_rows(a)
    ub, zb = unit_rows(b)
    return FrameDistanceMatrix(_block(ua, za, ub, zb), row_start, col_start)


# --------------------------------------------------------------------------- runs

@dataclass(frozen=True)
class DuplicationMatch:
    i_min: int
    j_min: int
    d_min: float
    k1: int
    k2: int
    l: int  # noqa: E741 - run length, named as in the literature
    f_video: float

    @property
    def gap(self) -> int:
        return self.j_min - self.i_min

    @property
    def first_range(self) -> Interval:
        return Interval(self.i_min - self.k1, self.i_min + self.k2)

    @property
    def second_range(self) -> Interval:
        return Interval(self.j_min - self.k1, self.j_min + self.k2)

    def to_dict(self) -> dict:
        return {
            "i_min": self.i_min,
            "j_min": self.j_min,
            "d_min": self.d_min,
            "k1": self.k1,
            "k2": self.k2,
            "l": self.l,
            "f_video": self.f_video,
            "first_range": list(self.first_range),
            "second_range": list(self.second_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DuplicationMatch":
        return cls(d["i_min"], d["j_min"], d["d_min"], d["k1"], d["k2"], d["l"], d["f_video"])


def video_score(d_min: float, l: int, gap: int, d_floor: float = 1e-6) -> float:  # noqa: E741
    """Video-level confidence ``-d_min / (l * gap)``.

    ``d_min`` is floored at ``d_floor`` so perfect duplicates still rank by run
    length and temporal gap.
    """
    if gap <= 0:
        raise DegenerateGap(f"j_min - i_min must be positive, got {gap}")
    if l < 1:
        raise ValueError(f"run length must be at least 1, got {l}")
    return -max(d_min, d_floor) / (l * gap)


def find_min(m: FrameDistanceMatrix, near_band: int = 8) -> Optional[tuple]:
    """Smallest eligible cell with ``j - i > near_band``; ties go to the smallest
    ``i`` then ``j``. Returns ``(i, j, d)`` in absolute frame indices or None."""
    ii = np.arange(m.values.shape[0])[:, None] + m.row_start
    jj = np.arange(m.values.shape[1])[None, :] + m.col_start
    ok = (jj - ii) > near_band
    ok &= ~np.isnan(m.values)
    if m.valid is not None:
        ok &= m.valid
    if not ok.any():
        return None
    masked = np.where(ok, m.values, np.inf)
    flat = int(np.argmin(masked))
    r, c = divmod(flat, m.values.shape[1])
    return r + m.row_start, c + m.col_start, float(m.values[r, c])


def extend_run(m: FrameDistanceMatrix, i: int, j: int, d_min: float, eps: float = 0.01) -> tuple:
    """Grow a run along the diagonal through ``(i, j)``.

    Backward first, then forward; every step must stay within ``eps`` of
    ``d_min``, inside the matrix, and keep the two ranges disjoint
    (``k1 + k2 + 1 <= j - i``). Returns ``(k1, k2)``.
    """
    gap = j - i
    r0, c0 = m.row_start, m.col_start
    r_end, c_end = r0 + m.values.shape[0] - 1, c0 + m.values.shape[1] - 1
    vals = m.values

    k1 = 0
    while True:
        k = k1 + 1
        if i - k < r0 or j - k < c0 or k + 1 > gap:
            break
        if not abs(vals[i - k - r0, j - k - c0] - d_min) <= eps:
            break
        k1 = k
    k2 = 0
    while True:
        k = k2 + 1
        if i + k > r_end or j + k > c_end or k1 + k + 1 > gap:
            break
        if not abs(vals[i + k - r0, j + k - c0] - d_min) <= eps:
            break
        k2 = k
    return k1, k2


def extract_run(
    m: FrameDistanceMatrix, eps: float = 0.01, near_band: int = 8, d_floor: float = 1e-6
) -> Optional[DuplicationMatch]:
    found = find_min(m, near_band)
    if found is None:
        return None
    i, j, d = found
    k1, k2 = extend_run(m, i, j, d, eps)
    l = k1 + k2 + 1  # noqa: E741
    return DuplicationMatch(i, j, d, k1, k2, l, video_score(d, l, j - i, d_floor))


# --------------------------------------------------------------------------- detector

@dataclass
class DetectionReport:
    matches: List[DuplicationMatch]
    frame_scores: np.ndarray
    video_score: float
    top_candidate: Optional[DuplicationMatch] = None
    t1: float = float("nan")
    candidates: List[CandidatePair] = field(default_factory=list)
    n_frames: int = 0
    diagnostics: dict = field(default_factory=dict)
    frame_matrix: Optional[FrameDistanceMatrix] = field(default=None, repr=False)
    sequence_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "video_score": _json_float(self.video_score),
            "t1": _json_float(self.t1),
            "matches": [m.to_dict() for m in self.matches],
            "top_candidate": self.top_candidate.to_dict() if self.top_candidate else None,
            "candidates": [[c.window_a, c.window_b, c.distance] for c in self.candidates],
            "frame_scores": [float(x) for x in self.frame_scores],
            "diagnostics": self.diagnostics,
        }


def _json_float(x: float):
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    if math.isnan(x):
        return None
    return x


def _parse_json_float(x) -> float:
    if x is None:
        return float("nan")
    return float(x)


def report_from_dict(d: dict) -> DetectionReport:
    return DetectionReport(
        matches=[DuplicationMatch.from_dict(m) for m in d["matches"]],
        frame_scores=np.asarray(d["frame_scores"], dtype=np.float64),
        video_score=_parse_json_float(d["video_score"]),
        top_candidate=DuplicationMatch.from_dict(d["top_candidate"]) if d.get("top_candidate") else None,
        t1=_parse_json_float(d.get("t1")),
        candidates=[CandidatePair(c[2], c[0], c[1]) for c in d.get("candidates", [])],
        n_frames=d.get("n_frames", len(d["frame_scores"])),
        diagnostics=d.get("diagnostics", {}),
    )


class _LazyFrameMatrix:
    """Full ``n x n`` frame distance matrix, filled block by block on demand."""

    def __init__(self, vectors: np.ndarray):
        self.unit, self.zero = unit_rows(vectors)
        n = len(vectors)
        self.values = np.full((n, n), np.nan)

    def compute_block(self, rows: range, cols: range, min_offset: Optional[int] = None) -> np.ndarray:
        r, c = slice(rows.start, rows.stop), slice(cols.start, cols.stop)
        if min_offset is not None:
            min_offset += rows.start - cols.start
        return _block(self.unit[r], self.zero[r], self.unit[c], self.zero[c], min_offset)

    def fill_diagonal(self, offset: int) -> None:
        n = self.values.shape[0]
        x = np.arange(0, n - offset)
        y = x + offset
        todo = np.isnan(self.values[x, y])
        if todo.any():
            xs, ys = x[todo], y[todo]
            self.values[xs, ys] = pair_distances(self.unit[xs], self.zero[xs], self.unit[ys], self.zero[ys])


def _resolve_t1(cfg: RunConfig, smat) -> float:
    if cfg.t1_mode == "fixed":
        return float(cfg.t1)
    if cfg.t1_mode == "all":
        return math.inf
    return default_t1(smat, cfg.min_window_gap, cfg.t1_percentile)


def detect(
    clip: VideoClip,
    config: Optional[RunConfig] = None,
    frame_series: Optional[EmbeddingSeries] = None,
    window_series: Optional[EmbeddingSeries] = None,
) -> DetectionReport:
    """Coarse-to-fine duplication search over one clip.

    Candidate window pairs from the sequence stage select blocks of the frame
    distance matrix. The best run is extracted, its neighbourhood masked, and
    extraction repeats until the minimum reaches ``t2`` or ``max_events``
    runs are found. ``t1_mode='all'`` searches every block.
    """
    cfg = config or RunConfig()
    clip.require(MIN_FRAMES)
    n = len(clip)
    jobs = cfg.workers

    if frame_series is None:
        frame_series = embed_frames(clip, cfg.embedder)
    if len(frame_series) != n:
        raise DimMismatch(f"{len(frame_series)} frame vectors for a {n}-frame clip")
    plan = plan_windows(n, cfg.window_length, cfg.overlap)
    if window_series is None:
        reuse = frame_series.vectors if cfg.sequence_spec == cfg.embedder else None
        window_series = embed_windows(clip, plan.windows, cfg.sequence_spec, frame_vectors=reuse)
    smat = sequence_distance_matrix(window_series, plan, jobs=jobs)
    t1 = _resolve_t1(cfg, smat)
    cands = candidate_pairs(smat, t1, cfg.min_window_gap)

    lazy = _LazyFrameMatrix(frame_series.vectors)
    blocks = [(plan.frames(c.window_a), plan.frames(c.window_b)) for c in cands]
    offset = None
    if cfg.t1_mode == "all" or len(plan.windows) == 1:
        # exhaustive: row bands over the upper triangle beyond the near band
        step = max(1, -(-n // max(jobs, 1)))
        blocks = [(range(r, min(n, r + step)), range(0, n)) for r in range(0, n, step)]
        offset = cfg.near_band + 1
    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            computed = list(pool.map(lambda rc: lazy.compute_block(*rc, min_offset=offset), blocks))
    else:
        computed = [lazy.compute_block(*rc, min_offset=offset) for rc in blocks]
    searched = np.zeros((n, n), dtype=bool)
    for (rows, cols), vals in zip(blocks, computed):
        r, c = slice(rows.start, rows.stop), slice(cols.start, cols.stop)
        known = ~np.isnan(vals)
        lazy.values[r, c] = np.where(known, vals, lazy.values[r, c])
        searched[r, c] |= known

    ii = np.arange(n)[:, None]
    jj = np.arange(n)[None, :]
    eligible = searched & ((jj - ii) > cfg.near_band)
    cell = np.where(eligible, lazy.values, np.inf)
    frame_scores = np.minimum(cell.min(axis=1), cell.min(axis=0))
    frame_scores[~np.isfinite(frame_scores)] = 1.0

    fm = FrameDistanceMatrix(lazy.values, 0, 0, eligible.copy())
    matches: List[DuplicationMatch] = []
    top = None
    for _ in range(cfg.max_events):
        found = find_min(fm, cfg.near_band)
        if found is None:
            break
        i, j, d = found
        lazy.fill_diagonal(j - i)
        k1, k2 = extend_run(fm, i, j, d, cfg.eps)
        l = k1 + k2 + 1  # noqa: E741
        match = DuplicationMatch(i, j, d, k1, k2, l, video_score(d, l, j - i, cfg.d_floor))
        if top is None:
            top = match
        if d >= cfg.t2:
            break
        matches.append(match)
        a, b = match.first_range, match.second_range
        fm.valid[max(0, a.start - l) : a.end + l + 1, max(0, b.start - l) : b.end + l + 1] = False

    matches.sort(key=lambda m: (-m.f_video, m.i_min, m.j_min))
    zero_frames = int(lazy.zero.sum())
    return DetectionReport(
        matches=matches,
        frame_scores=frame_scores,
        video_score=matches[0].f_video if matches else -math.inf,
        top_candidate=top,
        t1=t1,
        candidates=cands,
        n_frames=n,
        diagnostics={
            "zero_vector_frames": zero_frames,
            "windows": len(plan.windows),
            "searched_cells": int(eligible.sum()),
        },
        frame_matrix=fm,
        sequence_matrix=smat.values,
    )
