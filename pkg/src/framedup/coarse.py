"""Window-level search: overlapping windows, L2 sequence distances, candidate pairs."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import TooFewFrames
from .media_io import EmbeddingSeries

MIN_FRAMES = 17


@dataclass(frozen=True)
class WindowingPlan:
    n_frames: int
    length: int
    overlap: int
    windows: tuple

    @property
    def hop(self) -> int:
        return self.length - self.overlap

    @property
    def starts(self) -> list:
        return [s for s, _ in self.windows]

    def frames(self, idx: int) -> range:
        start, length = self.windows[idx]
        return range(start, start + length)


def plan_windows(n_frames: int, length: int = 64, overlap: int = 16) -> WindowingPlan:
    """Window starts at multiples of ``length - overlap``; the last start is clamped
    so the final window ends on the last frame. Clips shorter than ``length``
    get a single window covering everything."""
    if n_frames < MIN_FRAMES:
        raise TooFewFrames(f"{n_frames} frames; the pipeline needs at least {MIN_FRAMES}")
    if length < 2 or not 0 <= overlap < length:
        raise ValueError(f"need length >= 2 and 0 <= overlap < length, got {length}/{overlap}")
    if n_frames <= length:
        return WindowingPlan(n_frames, length, overlap, ((0, n_frames),))
    hop = length - overlap
    last = n_frames - length
    starts = list(range(0, last + 1, hop))
    if starts[-1] != last:
        starts.append(last)
    return WindowingPlan(n_frames, length, overlap, tuple((s, length) for s in starts))


@dataclass
class SequenceDistanceMatrix:
    values: np.ndarray
    plan: Optional[WindowingPlan] = None
    metric: str = "L2"


def _row_distances(vectors: np.ndarray, a: int) -> list:
    base = vectors[a]
    # fsum keeps each entry correctly rounded, independent of evaluation order
    return [math.sqrt(math.fsum((base - vectors[b]) ** 2)) for b in range(a + 1, len(vectors))]


def sequence_distance_matrix(
    series: EmbeddingSeries, plan: Optional[WindowingPlan] = None, jobs: int = 1
) -> SequenceDistanceMatrix:
    if series.granularity != "per-window":
        raise ValueError("sequence distances need a per-window embedding series")
    vecs = series.vectors
    w = len(vecs)
    out = np.zeros((w, w))
    if jobs > 1 and w > 2:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(lambda a: _row_distances(vecs, a), range(w)))
    else:
        rows = [_row_distances(vecs, a) for a in range(w)]
    for a, row in enumerate(rows):
        out[a, a + 1 :] = row
        out[a + 1 :, a] = row
    return SequenceDistanceMatrix(out, plan)


@dataclass(frozen=True, order=True)
class CandidatePair:
    distance: float
    window_a: int
    window_b: int


def off_band_values(m: SequenceDistanceMatrix, min_window_gap: int = 1) -> np.ndarray:
    a, b = np.triu_indices(m.values.shape[0], k=max(min_window_gap, 1))
    return m.values[a, b]


def default_t1(m: SequenceDistanceMatrix, min_window_gap: int = 1, percentile: float = 5.0) -> float:
    """Percentile of the off-band distances, nudged above the smallest one so the
    closest pair always passes the strict ``< t1`` gate."""
    vals = off_band_values(m, min_window_gap)
    if vals.size == 0:
        return 1e-9
    closest = float(np.nextafter(vals.min(), np.inf))
    return max(float(np.percentile(vals, percentile)), closest, 1e-9)


def candidate_pairs(m: SequenceDistanceMatrix, t1: float, min_window_gap: int = 1) -> List[CandidatePair]:
    """Every window pair ``a < b`` at least ``min_window_gap`` apart with distance
    strictly below ``t1``, closest first, ties by ``(a, b)``."""
    if not t1 > 0:
        raise ValueError(f"t1 must be positive, got {t1!r}")
    w = m.values.shape[0]
    gap = max(min_window_gap, 1)
    pairs = [
        CandidatePair(float(m.values[a, b]), a, b)
        for a in range(w)
        for b in range(a + gap, w)
        if m.values[a, b] < t1
    ]
    pairs.sort()
    return pairs
