"""Detection and localization metrics, confusion bars, corpus evaluation."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import jsonschema
import numpy as np
from scipy.stats import rankdata

from .coarse import MIN_FRAMES
from .config import RunConfig
from .errors import LengthMismatch, SchemaError, SingleClass
from .fine import Interval, detect
from .forgery import DUPLICATED, PRISTINE, TruthMask
from .localization import inconsistency_series, localize, score_boundaries
from .media_io import read_clip

MAX_FPS = 220.0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    optout: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn + self.optout

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn, "optout": self.optout}


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom)


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auc(scores: Sequence, labels: Optional[Sequence[bool]] = None) -> RocCurve:
    """ROC curve and AUC; higher scores mean "manipulated".

    Takes parallel ``scores``/``labels`` sequences, or a single sequence of
    ``(score, is_manipulated)`` pairs. The AUC is the Mann-Whitney statistic
    with mid-ranks for ties, which equals the trapezoidal area under the
    tie-grouped curve.
    """
    if labels is None:
        pairs = list(scores)
        scores = [p[0] for p in pairs]
        labels = [p[1] for p in pairs]
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape:
        raise LengthMismatch(f"{len(s)} scores for {len(y)} labels")
    if np.isnan(s).any():
        raise ValueError("scores must not be NaN")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"need both classes, got {n_pos} positive / {n_neg} negative")
    ranks = rankdata(s)  # average ranks for ties
    auc = (ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    last_of_group = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tps = np.cumsum(y_sorted)[last_of_group]
    fps = np.cumsum(~y_sorted)[last_of_group]
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    thresholds = np.r_[np.inf, s_sorted[last_of_group]]
    return RocCurve(fpr, tpr, thresholds, float(auc))


# --------------------------------------------------------------------------- confusion bars

_BAR_COLORS = {"tn": "#ffffff", "fn": "#1f4fd8", "fp": "#d82020", "tp": "#1fa83a"}
_BAR_TEXT = {"tn": ".", "fn": "-", "fp": "+", "tp": "#", "optout": "x"}


@dataclass
class ConfusionBar:
    counts: ConfusionCounts
    cells: list  # one of tn/fn/fp/tp/optout per frame
    truth: np.ndarray
    predicted: np.ndarray

    def text(self) -> str:
        truth = "".join("D" if t == DUPLICATED else ("s" if t != PRISTINE else ".") for t in self.truth)
        system = "".join("D" if p else "." for p in self.predicted)
        conf = "".join(_BAR_TEXT[c] for c in self.cells)
        return f"truth  |{truth}|\nsystem |{system}|\nconf   |{conf}|"

    def svg(self, width: int = 800, row_height: int = 16) -> str:
        n = len(self.cells)
        w = width / max(n, 1)
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{3 * row_height + 4}">',
            "<defs><pattern id=\"optout\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">"
            '<rect width="6" height="6" fill="#f5d000"/><path d="M0,6 L6,0" stroke="#000" stroke-width="2"/>'
            "</pattern></defs>",
        ]
        truth_col = {PRISTINE: "#ffffff", DUPLICATED: "#000000"}
        for f in range(n):
            x = f"{f * w:.3f}"
            tcol = truth_col.get(int(self.truth[f]), "#9a9a9a")
            pcol = "#000000" if self.predicted[f] else "#ffffff"
            cell = self.cells[f]
            ccol = "url(#optout)" if cell == "optout" else _BAR_COLORS[cell]
            out.append(f'<rect x="{x}" y="0" width="{w:.3f}" height="{row_height}" fill="{tcol}"/>')
            out.append(f'<rect x="{x}" y="{row_height + 2}" width="{w:.3f}" height="{row_height}" fill="{pcol}"/>')
            out.append(f'<rect x="{x}" y="{2 * row_height + 4}" width="{w:.3f}" height="{row_height}" fill="{ccol}"/>')
        out.append("</svg>")
        return "\n".join(out)


def _interval_mask(n: int, intervals: Iterable) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for start, end in intervals:
        mask[max(0, start) : min(n, end + 1)] = True
    return mask


def confusion_bar(truth: TruthMask, predicted: Iterable, optout: Optional[Iterable] = None) -> ConfusionBar:
    """Per-frame confusion of predicted duplicated intervals against the truth.

    ``predicted`` is either inclusive ``(start, end)`` intervals or a boolean
    mask of the clip's length.
    """
    n = len(truth.labels)
    pred = list(predicted) if not isinstance(predicted, np.ndarray) else predicted
    if isinstance(pred, np.ndarray):
        if pred.shape != (n,):
            raise LengthMismatch(f"prediction mask has {pred.shape[0]} frames, truth has {n}")
        pmask = pred.astype(bool)
    else:
        for start, end in pred:
            if start < 0 or end >= n or end < start:
                raise LengthMismatch(f"predicted interval [{start}, {end}] outside a {n}-frame clip")
        pmask = _interval_mask(n, pred)
    omask = _interval_mask(n, optout or [])
    positive = truth.labels == DUPLICATED
    cells = []
    for f in range(n):
        if omask[f]:
            cells.append("optout")
        elif positive[f]:
            cells.append("tp" if pmask[f] else "fn")
        else:
            cells.append("fp" if pmask[f] else "tn")
    counts = ConfusionCounts(
        tp=cells.count("tp"), fp=cells.count("fp"), tn=cells.count("tn"), fn=cells.count("fn"), optout=cells.count("optout")
    )
    return ConfusionBar(counts, cells, truth.labels.copy(), pmask)


# --------------------------------------------------------------------------- corpus

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["items"],
    "properties": {
        "items": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "path", "truth_path", "pristine"],
                "properties": {
                    "id": {"type": "string"},
                    "path": {"type": "string"},
                    "truth_path": {"type": "string"},
                    "pristine": {"type": "boolean"},
                    "spec": {"type": ["object", "null"]},
                },
            },
        }
    },
}


def load_manifest(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        jsonschema.validate(data, MANIFEST_SCHEMA)
    except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
        raise SchemaError(f"{path}: not a corpus manifest ({exc.message if hasattr(exc, 'message') else exc})") from None
    ids = [it["id"] for it in data["items"]]
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicate item ids")
    return data


def classify_localization(truth: TruthMask, predicted_dup: Optional[Interval]) -> str:
    """correct / incorrect / ambiguous (zero gap between the truth ranges)."""
    if truth.gap == 0:
        return "ambiguous"
    if predicted_dup is None:
        return "incorrect"
    pred = set(predicted_dup.frames())
    hit_dup = len(pred & set(truth.duplicated_range.frames()))
    hit_sel = len(pred & set(truth.selected_range.frames()))
    return "correct" if hit_dup > hit_sel else "incorrect"


def analyze_clip(clip, config: RunConfig) -> dict:
    """Detect, then localize every reported match; JSON-ready."""
    report = detect(clip, config)
    locs = []
    if report.matches:
        s = inconsistency_series(score_boundaries(clip, config.scorer), config.lam)
        locs = [localize(m, s, config.wind) for m in report.matches]
    return {"report": report, "localizations": locs}


def _evaluate_item(item: dict, root: Path, config: RunConfig) -> dict:
    truth = TruthMask.from_dict(json.loads((root / item["truth_path"]).read_text()))
    clip = read_clip(root / item["path"], grayscale=config.grayscale)
    if len(clip) != len(truth.labels):
        raise SchemaError(f"{item['id']}: clip has {len(clip)} frames, truth has {len(truth.labels)}")
    out = {"id": item["id"], "pristine": bool(item["pristine"]), "n_frames": len(clip)}
    if len(clip) < MIN_FRAMES or clip.fps > MAX_FPS:
        out.update(optout=True, video_score=None, mcc=None, localization=None)
        return out
    result = analyze_clip(clip, config)
    report, locs = result["report"], result["localizations"]
    out["optout"] = False
    out["video_score"] = report.video_score
    out["frame_scores"] = report.frame_scores
    out["labels"] = truth.labels
    if truth.pristine:
        out.update(mcc=None, localization=None)
        return out
    predicted = locs[0].duplicated_range if locs else None
    bar = confusion_bar(truth, [predicted] if predicted else [])
    out["mcc"] = mcc(bar.counts)
    out["localization"] = classify_localization(truth, predicted)
    out["predicted_duplicated"] = list(predicted) if predicted else None
    return out


def _safe_auc(scores, labels) -> Optional[float]:
    try:
        return roc_auc(scores, labels).auc
    except SingleClass:
        return None


def _jsonable_score(x):
    if x is None:
        return None
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def evaluate_corpus(manifest_path, config: Optional[RunConfig] = None) -> dict:
    """Run detection and localization over a generated corpus.

    Video AUC ranks clips by video score. Frame AUC ranks frames by negated
    frame distance, with selected and duplicated frames both positive. MCC
    counts only duplicated frames as positive.
    """
    config = config or RunConfig()
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    root = manifest_path.parent
    items = sorted(manifest["items"], key=lambda it: it["id"])
    jobs = config.workers
    inner = config.replace(jobs=1) if jobs > 1 else config
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda it: _evaluate_item(it, root, inner), items))
    else:
        results = [_evaluate_item(it, root, config) for it in items]

    scored = [r for r in results if not r["optout"]]
    video_auc = _safe_auc([r["video_score"] for r in scored], [not r["pristine"] for r in scored])
    if scored:
        frame_scores = np.concatenate([-np.asarray(r["frame_scores"]) for r in scored])
        frame_labels = np.concatenate([np.asarray(r["labels"]) != PRISTINE for r in scored])
        frame_auc = _safe_auc(frame_scores, frame_labels)
    else:
        frame_auc = None
    mccs = [r["mcc"] for r in scored if r["mcc"] is not None]
    taxonomy = {"correct": 0, "incorrect": 0, "ambiguous": 0}
    for r in scored:
        if r["localization"]:
            taxonomy[r["localization"]] += 1

    summary_items: List[dict] = []
    for r in results:
        entry = {
            "id": r["id"],
            "pristine": r["pristine"],
            "optout": r["optout"],
            "video_score": _jsonable_score(r["video_score"]),
            "mcc": r["mcc"],
            "localization": r["localization"],
        }
        if "predicted_duplicated" in r:
            entry["predicted_duplicated"] = r["predicted_duplicated"]
        summary_items.append(entry)
    return {
        "video_auc": video_auc,
        "frame_auc": frame_auc,
        "mean_mcc": float(np.mean(mccs)) if mccs else None,
        "localization_counts": taxonomy,
        "items": summary_items,
    }
