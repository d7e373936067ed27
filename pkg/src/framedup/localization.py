"""Tell the inserted copy apart from its source using boundary inconsistency.

Boundary ``t`` sits between frames ``t`` and ``t + 1``. Each boundary gets
three class scores (none / frame drop / shot break). They are folded into one
inconsistency value, ``s = drop + break - lambda * none``, which is then
summed around the entry and exit boundaries of both matched runs. The run
with the larger sum is the inserted copy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .coarse import MIN_FRAMES
from .config import ScorerSpec
from .errors import CountMismatch
from .fine import DuplicationMatch, Interval
from .media_io import VideoClip, read_fdeb

MAD_SCALE = 1.4826


@dataclass
class BoundaryScores:
    """``(n_frames - 1, 3)`` array of ``(s_none, s_drop, s_break)`` rows."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"boundary scores must be (n, 3), got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("boundary scores must be finite")
        self.values = v

    def __len__(self) -> int:
        return len(self.values)

    @property
    def none(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def drop(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def brk(self) -> np.ndarray:
        return self.values[:, 2]


@dataclass
class InconsistencySeries:
    s: np.ndarray
    lam: float = 0.1


@dataclass(frozen=True)
class LocalizationResult:
    duplicated_range: Interval
    selected_range: Interval
    s1: float
    s2: float
    decided_by: str
    terms: tuple = (0, 0)

    def to_dict(self) -> dict:
        return {
            "duplicated_range": list(self.duplicated_range),
            "selected_range": list(self.selected_range),
            "s1": self.s1,
            "s2": self.s2,
            "decided_by": self.decided_by,
            "terms": list(self.terms),
        }


def boundary_discontinuity(clip: VideoClip) -> np.ndarray:
    """Mean absolute intensity change across each boundary."""
    levels = [f.intensity() for f in clip.frames]
    return np.array([np.abs(b - a).mean() for a, b in zip(levels[:-1], levels[1:])])


def robust_z(values: np.ndarray, context: int = 16, floor: float = 0.25) -> np.ndarray:
    """Standardise each entry by the median and MAD of the ``context`` entries
    around it (window shifted inward at the ends)."""
    n = len(values)
    width = min(context, n)
    half = width // 2
    z = np.empty(n)
    for t in range(n):
        lo = min(max(0, t - half), n - width)
        ctx = values[lo : lo + width]
        med = np.median(ctx)
        scale = max(MAD_SCALE * np.median(np.abs(ctx - med)), 0.05 * med, floor)
        z[t] = (values[t] - med) / scale
    return z


def _soft_classes(z: np.ndarray, scorer: ScorerSpec) -> np.ndarray:
    inconsistent = expit((z - scorer.drop_z) / scorer.softness)
    cut = expit((z - scorer.break_z) / scorer.softness)
    return np.stack([1.0 - inconsistent, inconsistent * (1.0 - cut), inconsistent * cut], axis=1)


def score_boundaries(clip: VideoClip, scorer: Optional[ScorerSpec] = None) -> BoundaryScores:
    """Class scores per boundary.

    The builtin scorer takes a robust z-score of each boundary's intensity
    change against its neighbours and maps it through two logistic steps,
    moving mass from none to drop to break as the jump grows.
    """
    scorer = scorer or ScorerSpec()
    clip.require(MIN_FRAMES)
    if scorer.kind == "external-file":
        rows = read_fdeb(scorer.path).astype(np.float64)
        if rows.shape != (len(clip) - 1, 3):
            raise CountMismatch(f"{scorer.path}: {rows.shape} scores, need ({len(clip) - 1}, 3)")
        return BoundaryScores(rows)
    z = robust_z(boundary_discontinuity(clip), scorer.context)
    return BoundaryScores(_soft_classes(z, scorer))


def inconsistency_series(b: BoundaryScores, lam: float = 0.1) -> InconsistencySeries:
    return InconsistencySeries(b.drop + b.brk - lam * b.none, lam)


def _window_terms(s: np.ndarray, start: int, length: int, wind: int) -> list:
    n = len(s)
    enter, leave = start - 1, start + length - 1
    picks = [enter + k for k in range(-wind, wind + 1)] + [leave + k for k in range(-wind, wind + 1)]
    return [s[t] for t in picks if 0 <= t < n]


def run_score(s: np.ndarray, run: Interval, wind: int = 3) -> tuple:
    """``(sum, count)`` of inconsistency around the entry and exit of ``run``."""
    terms = _window_terms(np.asarray(s), run.start, run.length, wind)
    return float(np.sum(terms)), len(terms)


def localize(match: DuplicationMatch, s, wind: int = 3) -> LocalizationResult:
    """Pick the inserted copy among the two runs of ``match``.

    Sums are compared directly when both runs see the same number of in-range
    boundaries, otherwise their means are. Ties go to the later run.
    """
    series = s.s if isinstance(s, InconsistencySeries) else np.asarray(s, dtype=np.float64)
    first, second = match.first_range, match.second_range
    s1, n1 = run_score(series, first, wind)
    s2, n2 = run_score(series, second, wind)
    if n1 != n2:
        s1 = s1 / n1 if n1 else -np.inf
        s2 = s2 / n2 if n2 else -np.inf
    if s1 > s2:
        return LocalizationResult(first, second, s1, s2, "s1_gt_s2", (n1, n2))
    return LocalizationResult(second, first, s1, s2, "s2_ge_s1", (n1, n2))
