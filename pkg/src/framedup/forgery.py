"""Synthetic frame-duplication forgeries with ground truth.

Codec degradation is approximated by additive Gaussian noise on the inserted
copy. ``synthetic_clip`` renders seed footage (a panning textured scene with
moving blobs) when no real footage is at hand.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, InsufficientFrames, OverlapViolation, RangeOutOfBounds
from .fine import Interval
from .media_io import VideoClip, write_y4m

PRISTINE, SELECTED, DUPLICATED = 0, 1, 2
LABEL_NAMES = ("pristine", "selected", "duplicated")
DURATIONS_S = (0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class ManipulationSpec:
    source_start: int
    length: int
    insert_at: int
    noise_sigma: float = 0.0
    seed: int = 0

    @property
    def source_range(self) -> Interval:
        return Interval(self.source_start, self.source_start + self.length - 1)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TruthMask:
    labels: np.ndarray
    selected_range: Optional[Interval] = None
    duplicated_range: Optional[Interval] = None

    @property
    def pristine(self) -> bool:
        return self.duplicated_range is None

    @property
    def gap(self) -> Optional[int]:
        """Frames strictly between the selected and duplicated ranges."""
        if self.pristine:
            return None
        a, b = sorted([self.selected_range, self.duplicated_range])
        return b.start - a.end - 1

    def to_dict(self) -> dict:
        return {
            "n_frames": int(len(self.labels)),
            "selected_range": list(self.selected_range) if self.selected_range else None,
            "duplicated_range": list(self.duplicated_range) if self.duplicated_range else None,
            "gap": self.gap,
            "labels": [LABEL_NAMES[x] for x in self.labels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TruthMask":
        labels = np.array([LABEL_NAMES.index(x) for x in d["labels"]], dtype=np.int8)
        sel = Interval(*d["selected_range"]) if d.get("selected_range") else None
        dup = Interval(*d["duplicated_range"]) if d.get("duplicated_range") else None
        return cls(labels, sel, dup)

    @classmethod
    def clean(cls, n_frames: int) -> "TruthMask":
        return cls(np.zeros(n_frames, dtype=np.int8))


def apply_duplication(clip: VideoClip, spec: ManipulationSpec):
    """Insert a (possibly noisy) copy of ``spec.source_range`` before input frame
    ``spec.insert_at``. Returns the forged clip and its truth mask."""
    n = len(clip)
    s, length, p = spec.source_start, spec.length, spec.insert_at
    if length < 1 or s < 0 or s + length > n or not 0 <= p <= n:
        raise RangeOutOfBounds(f"source ({s}, {length}) / insert_at {p} invalid for {n} frames")
    if s < p < s + length:
        raise OverlapViolation(f"insert_at {p} falls inside the source range {spec.source_range}")

    copies = [f.data for f in clip.frames[s : s + length]]
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        copies = [
            np.clip(np.rint(c + rng.normal(0.0, spec.noise_sigma, c.shape)), 0, 255).astype(np.uint8)
            for c in copies
        ]
    frames = [f.data for f in clip.frames[:p]] + copies + [f.data for f in clip.frames[p:]]

    labels = np.zeros(n + length, dtype=np.int8)
    dup = Interval(p, p + length - 1)
    sel_start = s if p >= s + length else s + length
    sel = Interval(sel_start, sel_start + length - 1)
    labels[dup.start : dup.end + 1] = DUPLICATED
    labels[sel.start : sel.end + 1] = SELECTED
    out = VideoClip(frames, fps=clip.fps, source_id=f"{clip.source_id}+dup")
    return out, TruthMask(labels, sel, dup)


def synthesize_shot_break(clip_a: VideoClip, clip_b: VideoClip):
    """Hard cut from ``clip_a`` to ``clip_b``; the cut is boundary ``len(clip_a) - 1``."""
    if clip_a.shape != clip_b.shape:
        raise DimensionMismatch(f"cannot join {clip_a.shape} and {clip_b.shape} frames")
    out = VideoClip(clip_a.frames + clip_b.frames, fps=clip_a.fps, source_id=f"{clip_a.source_id}|{clip_b.source_id}")
    return out, len(clip_a) - 1


def _bilinear_crop(texture: np.ndarray, y: float, x: float, height: int, width: int) -> np.ndarray:
    iy, ix = int(np.floor(y)), int(np.floor(x))
    fy, fx = y - iy, x - ix
    win = texture[iy : iy + height + 1, ix : ix + width + 1]
    top = (1 - fx) * win[:height, :width] + fx * win[:height, 1:]
    bottom = (1 - fx) * win[1:, :width] + fx * win[1:, 1:]
    return (1 - fy) * top + fy * bottom


def synthetic_clip(
    n_frames: int,
    seed: int = 0,
    width: int = 64,
    height: int = 48,
    pan_speed: tuple = (2.5, 4.5),
    noise: float = 2.0,
    static_pause: Optional[tuple] = None,
    fps: float = 30.0,
) -> VideoClip:
    """Render a panning shot over a random texture with two moving blobs.

    ``static_pause=(start, length)`` freezes camera and objects for those frames;
    only sensor noise (std ``noise``) changes between them.
    """
    rng = np.random.default_rng(seed)
    speeds = rng.uniform(*pan_speed, size=n_frames)
    clock = np.arange(n_frames, dtype=np.float64)
    if static_pause is not None:
        ps, pl = static_pause
        speeds[ps : ps + pl] = 0.0
        clock[ps : ps + pl] = clock[ps]
        clock[ps + pl :] -= pl - 1
    xs = np.concatenate([[0.0], np.cumsum(speeds[:-1])])
    ys = 6.0 + 4.0 * np.sin(clock / 40.0 + rng.uniform(0, 2 * np.pi))

    canvas_w = int(xs[-1]) + width + 4
    canvas_h = height + 16
    texture = ndimage.gaussian_filter(rng.normal(size=(canvas_h, canvas_w, 3)), sigma=(2.0, 2.0, 0))
    texture = 128.0 + 45.0 * (texture - texture.mean((0, 1))) / texture.std((0, 1))

    blobs = []
    for _ in range(2):
        blobs.append(
            dict(
                x0=rng.uniform(0, width), y0=rng.uniform(0, height),
                vx=rng.uniform(-0.8, 0.8), vy=rng.uniform(-0.5, 0.5),
                r=rng.uniform(5, 9), color=rng.uniform(0, 255, 3),
            )
        )

    gy, gx = np.mgrid[0:height, 0:width].astype(np.float64)
    frames = []
    for t in range(n_frames):
        img = _bilinear_crop(texture, ys[t], xs[t], height, width)
        for b in blobs:
            cx = (b["x0"] + b["vx"] * clock[t]) % (width + 20) - 10
            cy = (b["y0"] + b["vy"] * clock[t]) % (height + 20) - 10
            inside = (gx - cx) ** 2 + (gy - cy) ** 2 <= b["r"] ** 2
            img[inside] = b["color"]
        if noise > 0:
            img = img + rng.normal(0.0, noise, img.shape)
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    return VideoClip(frames, fps=fps, source_id=f"synthetic-{seed}")


def random_spec(
    n_frames: int,
    rng: np.random.Generator,
    fps: float = 30.0,
    durations: Sequence[float] = DURATIONS_S,
    min_gap: int = 32,
    max_gap: Optional[int] = None,
    noise_sigma: float = 0.0,
    duration: Optional[float] = None,
) -> ManipulationSpec:
    """Draw a duplication whose copy sits ``gap`` frames from its source."""
    dur = float(rng.choice(durations)) if duration is None else float(duration)
    length = int(round(dur * fps))
    room = n_frames - length
    if length < 1 or room < min_gap:
        raise InsufficientFrames(
            f"a {dur:g} s copy ({length} frames) with gap >= {min_gap} needs {length + min_gap} frames, clip has {n_frames}"
        )
    hi = room if max_gap is None else min(room, max_gap)
    gap = int(rng.integers(min_gap, hi + 1))
    first = int(rng.integers(0, room - gap + 1))
    if rng.random() < 0.5:
        # copy goes after its source
        spec = ManipulationSpec(first, length, first + length + gap, noise_sigma, int(rng.integers(2**31)))
    else:
        spec = ManipulationSpec(first + gap, length, first, noise_sigma, int(rng.integers(2**31)))
    return spec


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def generate_corpus(
    seed_clips: Sequence[VideoClip],
    n_manipulated: int,
    n_pristine: int,
    out_dir,
    param_ranges: Optional[dict] = None,
    seed: int = 0,
) -> dict:
    """Write forged and pristine clips, truth masks and ``manifest.json``.

    Item ``k`` draws from seed clip ``k mod len(seed_clips)``. ``param_ranges``
    may set ``durations`` (seconds), ``noise_sigma`` (list to choose from),
    ``min_gap`` and ``max_gap``.
    """
    if not seed_clips:
        raise ValueError("at least one seed clip is required")
    params = {"durations": list(DURATIONS_S), "noise_sigma": [0.0], "min_gap": 32, "max_gap": None}
    params.update(param_ranges or {})
    out = Path(out_dir)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    items = []
    total = n_manipulated + n_pristine
    for k in range(total):
        src = seed_clips[k % len(seed_clips)]
        item_id = f"item-{k:04d}"
        if k < n_manipulated:
            spec = random_spec(
                len(src), rng, src.fps, params["durations"], params["min_gap"], params["max_gap"],
                float(rng.choice(params["noise_sigma"])),
            )
            clip, truth = apply_duplication(src, spec)
        else:
            spec, clip, truth = None, src, TruthMask.clean(len(src))
        clip_path = out / "clips" / f"{item_id}.y4m"
        truth_path = out / "truth" / f"{item_id}.json"
        write_y4m(clip_path, clip)
        truth_path.write_text(json.dumps({"id": item_id, **truth.to_dict()}, sort_keys=True) + "\n")
        items.append(
            {
                "id": item_id,
                "path": str(clip_path.relative_to(out)),
                "truth_path": str(truth_path.relative_to(out)),
                "spec": spec.to_dict() if spec else None,
                "pristine": spec is None,
                "sha256": _digest(clip_path),
            }
        )
    manifest = {"items": items, "seed": seed, "params": params}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
