"""Frame and sequence embedders.

Builtin embedders are cheap deterministic stand-ins for deep backbones; deep
features computed elsewhere come in through FDEB files (``external-file``).

Sequence vectors pool per-frame appearance features and per-step motion
features over a window with mean and standard deviation. Pooling runs on
fixed-point integers so that the rolling evaluator, which adds the incoming
frame and drops the outgoing one, reproduces per-window recomputation
exactly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigError, CountMismatch, IncompatibleKind, WindowOutOfBounds
from .media_io import EmbeddingSeries, FrameBuffer, VideoClip, read_embeddings, rounded_intensity

__all__ = [
    "EmbedderSpec",
    "EmbeddingSeries",
    "RollingSequenceEmbedder",
    "embed_frame",
    "embed_frames",
    "embed_sequence",
    "embed_windows",
    "import_external",
]

KINDS = ("downsample-intensity", "color-histogram", "temporal-diff-stats", "external-file")
FRAME_KINDS = ("downsample-intensity", "color-histogram")
SEQUENCE_KINDS = FRAME_KINDS + ("temporal-diff-stats",)

_DEFAULTS = {
    "downsample-intensity": {"grid": 16, "center": True},
    "color-histogram": {"bins": 32},
    "temporal-diff-stats": {"grid": 8},
    "external-file": {"path": None, "granularity": "per-frame"},
}

# Pooling resolution: features lie in [-1, 1] and are stored as multiples of 2**-20.
QUANT_BITS = 20
QUANT = 1 << QUANT_BITS
MAX_POOL_LENGTH = 2048  # keeps n*sum(q^2) inside int64


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "downsample-intensity"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown embedder kind {self.kind!r}; expected one of {KINDS}")
        defaults = _DEFAULTS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = {**defaults, **self.params}
        if self.kind in ("downsample-intensity", "temporal-diff-stats"):
            g = merged["grid"]
            if not isinstance(g, int) or isinstance(g, bool) or not 1 <= g <= 256:
                raise ConfigError(f"grid must be an integer in [1, 256], got {g!r}")
        if self.kind == "downsample-intensity" and not isinstance(merged["center"], bool):
            raise ConfigError("center must be a boolean")
        if self.kind == "color-histogram":
            b = merged["bins"]
            if not isinstance(b, int) or isinstance(b, bool) or not 1 <= b <= 256:
                raise ConfigError(f"bins must be an integer in [1, 256], got {b!r}")
        if self.kind == "external-file":
            if not merged["path"]:
                raise ConfigError("external-file embedder needs a path")
            if merged["granularity"] not in ("per-frame", "per-window"):
                raise ConfigError(f"bad granularity {merged['granularity']!r}")
        object.__setattr__(self, "params", merged)

    def frame_dim(self, channels: int = 3) -> int:
        if self.kind == "downsample-intensity":
            return self.params["grid"] ** 2
        if self.kind == "color-histogram":
            return self.params["bins"] * channels
        raise IncompatibleKind(f"{self.kind} does not embed single frames")

    def sequence_dim(self, channels: int = 3) -> int:
        if self.kind in FRAME_KINDS:
            return 2 * self.frame_dim(channels) + 2
        if self.kind == "temporal-diff-stats":
            return 2 * self.params["grid"] ** 2
        raise IncompatibleKind(f"{self.kind} has no builtin sequence embedding")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "EmbedderSpec":
        unknown = set(d) - {"kind", "params"}
        if unknown:
            raise ConfigError(f"unknown embedder keys {sorted(unknown)}")
        return cls(d.get("kind", "downsample-intensity"), dict(d.get("params", {})))


@lru_cache(maxsize=64)
def _bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic ``(n_out, n_in)`` interpolation matrix, half-pixel centres."""
    m = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    w = src - lo
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - w)
    np.add.at(m, (rows, hi), w)
    m.setflags(write=False)
    return m


def _resize(plane: np.ndarray, g: int) -> np.ndarray:
    rh = _bilinear_matrix(plane.shape[0], g)
    rw = _bilinear_matrix(plane.shape[1], g)
    return (rh @ plane) @ rw.T


def embed_frame(frame: FrameBuffer, spec: EmbedderSpec) -> np.ndarray:
    """Embed one frame.

    ``downsample-intensity`` resizes the channel-mean intensity (scaled to
    [0, 1]) to a ``grid x grid`` thumbnail; with ``center`` the thumbnail mean
    is removed so that cosine distance compares structure, not brightness.
    ``color-histogram`` gives one normalised ``bins``-bin histogram per channel.
    """
    if spec.kind == "downsample-intensity":
        thumb = _resize(frame.intensity() / 255.0, spec.params["grid"]).ravel()
        if spec.params["center"]:
            thumb = thumb - thumb.mean()
        return thumb
    if spec.kind == "color-histogram":
        bins = spec.params["bins"]
        pixels = frame.height * frame.width
        hists = [
            np.bincount((frame.data[:, :, c].ravel().astype(np.int64) * bins) >> 8, minlength=bins) / pixels
            for c in range(frame.channels)
        ]
        return np.concatenate(hists)
    raise IncompatibleKind(f"{spec.kind} cannot embed single frames")


def embed_frames(clip: VideoClip, spec: EmbedderSpec) -> EmbeddingSeries:
    if spec.kind == "external-file":
        return import_external(spec.params["path"], "per-frame", expected_count=len(clip))
    return EmbeddingSeries(np.stack([embed_frame(f, spec) for f in clip.frames]), "per-frame")


# --------------------------------------------------------------------------- pooling

def _quantize(x: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(x) * QUANT).astype(np.int64)


def _motion_feature(prev_level: np.ndarray, next_level: np.ndarray, spec: EmbedderSpec) -> np.ndarray:
    step = np.abs(next_level.astype(np.float64) - prev_level) / 255.0
    if spec.kind == "temporal-diff-stats":
        return _resize(step, spec.params["grid"]).ravel()
    return np.array([step.mean()])


def _appearance_feature(frame: FrameBuffer, spec: EmbedderSpec) -> np.ndarray:
    if spec.kind == "temporal-diff-stats":
        return np.empty(0)
    return embed_frame(frame, spec)


def _pool(s1: np.ndarray, s2: np.ndarray, n: int) -> tuple:
    scale = float(n) * QUANT
    mean = s1 / scale
    spread = n * s2 - s1 * s1  # exact: n^2 * variance in quantised units
    std = np.sqrt(np.maximum(spread, 0).astype(np.float64)) / scale
    return mean, std


def _finalize(a1, a2, n_frames, m1, m2, n_steps) -> np.ndarray:
    am, asd = _pool(a1, a2, n_frames)
    mm, msd = _pool(m1, m2, n_steps)
    return np.concatenate([am, asd, mm, msd])


def _check_sequence(spec: EmbedderSpec, length: int) -> None:
    if spec.kind not in SEQUENCE_KINDS:
        raise IncompatibleKind(f"{spec.kind} has no builtin sequence embedding")
    if length < 2:
        raise WindowOutOfBounds(f"sequence windows need at least 2 frames, got {length}")
    if length > MAX_POOL_LENGTH:
        raise WindowOutOfBounds(f"window length {length} exceeds {MAX_POOL_LENGTH}")


def embed_sequence(clip: VideoClip, window: tuple, spec: EmbedderSpec) -> np.ndarray:
    """Embed ``clip[start:start+length]`` from scratch."""
    start, length = window
    _check_sequence(spec, length)
    if start < 0 or start + length > len(clip):
        raise WindowOutOfBounds(f"window {window} outside a {len(clip)}-frame clip")
    frames = clip.frames[start : start + length]
    app = np.stack([_quantize(_appearance_feature(f, spec)) for f in frames])
    levels = [rounded_intensity(f) for f in frames]
    mot = np.stack([_quantize(_motion_feature(a, b, spec)) for a, b in zip(levels[:-1], levels[1:])])
    return _finalize(app.sum(0), (app * app).sum(0), length, mot.sum(0), (mot * mot).sum(0), length - 1)


class RollingSequenceEmbedder:
    """Slides a fixed-length window one frame at a time.

    Each advance embeds only the incoming frame and its motion step; features
    of the frames still inside the window are reused. Not thread-safe; use one
    instance per clip.
    """

    def __init__(self, clip: VideoClip, length: int, spec: EmbedderSpec):
        _check_sequence(spec, length)
        if length > len(clip):
            raise WindowOutOfBounds(f"window length {length} exceeds clip length {len(clip)}")
        self.clip = clip
        self.length = length
        self.spec = spec
        self.start = -1
        self._app: deque = deque()
        self._mot: deque = deque()
        self._last_level: Optional[np.ndarray] = None

    def _push_frame(self, idx: int) -> None:
        frame = self.clip.frames[idx]
        a = _quantize(_appearance_feature(frame, self.spec))
        self._app.append(a)
        self._a1 += a
        self._a2 += a * a
        level = rounded_intensity(frame)
        if self._last_level is not None:
            m = _quantize(_motion_feature(self._last_level, level, self.spec))
            self._mot.append(m)
            self._m1 += m
            self._m2 += m * m
        self._last_level = level

    def _prime(self) -> None:
        a_dim = _appearance_feature(self.clip.frames[0], self.spec).shape[0]
        m_dim = 1 if self.spec.kind in FRAME_KINDS else self.spec.params["grid"] ** 2
        self._a1 = np.zeros(a_dim, np.int64)
        self._a2 = np.zeros(a_dim, np.int64)
        self._m1 = np.zeros(m_dim, np.int64)
        self._m2 = np.zeros(m_dim, np.int64)
        for idx in range(self.length):
            self._push_frame(idx)
        self.start = 0

    def advance(self) -> bool:
        """Move the window forward by one frame; False once the clip is exhausted."""
        if self.start < 0:
            self._prime()
            return True
        nxt = self.start + self.length
        if nxt >= len(self.clip):
            return False
        a = self._app.popleft()
        self._a1 -= a
        self._a2 -= a * a
        m = self._mot.popleft()
        self._m1 -= m
        self._m2 -= m * m
        self._push_frame(nxt)
        self.start += 1
        return True

    def current(self) -> np.ndarray:
        if self.start < 0:
            raise RuntimeError("call advance() before current()")
        return _finalize(self._a1, self._a2, self.length, self._m1, self._m2, self.length - 1)

    def __iter__(self) -> Iterator[tuple]:
        while self.advance():
            yield self.start, self.current()


def embed_windows(
    clip: VideoClip, windows, spec: EmbedderSpec, frame_vectors: Optional[np.ndarray] = None
) -> EmbeddingSeries:
    """Embed a list of ``(start, length)`` windows, computing each frame's features once.

    ``frame_vectors`` may supply ``embed_frame`` outputs already computed with ``spec``.
    """
    windows = [tuple(w) for w in windows]
    if spec.kind == "external-file":
        return import_external(spec.params["path"], "per-window", expected_count=len(windows))
    if not windows:
        raise WindowOutOfBounds("no windows to embed")
    for start, length in windows:
        _check_sequence(spec, length)
        if start < 0 or start + length > len(clip):
            raise WindowOutOfBounds(f"window {(start, length)} outside a {len(clip)}-frame clip")
    if frame_vectors is not None and spec.kind in FRAME_KINDS:
        app = _quantize(frame_vectors)
    else:
        app = np.stack([_quantize(_appearance_feature(f, spec)) for f in clip.frames])
    levels = [rounded_intensity(f) for f in clip.frames]
    mot = np.stack([_quantize(_motion_feature(a, b, spec)) for a, b in zip(levels[:-1], levels[1:])])

    def prefix(x):
        out = np.zeros((x.shape[0] + 1, x.shape[1]), np.int64)
        np.cumsum(x, axis=0, out=out[1:])
        return out

    pa1, pa2, pm1, pm2 = prefix(app), prefix(app * app), prefix(mot), prefix(mot * mot)
    vecs = []
    for start, length in windows:
        end = start + length
        vecs.append(
            _finalize(
                pa1[end] - pa1[start], pa2[end] - pa2[start], length,
                pm1[end - 1] - pm1[start], pm2[end - 1] - pm2[start], length - 1,
            )
        )
    lengths = {w[1] for w in windows}
    hop = windows[1][0] - windows[0][0] if len(windows) > 1 else 0
    spec_tuple = (windows[0][1], hop) if len(lengths) == 1 else None
    return EmbeddingSeries(np.stack(vecs), "per-window", spec_tuple)


def import_external(path, expected_granularity: str, expected_count: Optional[int] = None) -> EmbeddingSeries:
    """Load externally computed features (e.g. 1024-d deep features) from an FDEB file."""
    series = read_embeddings(path, granularity=expected_granularity)
    if expected_count is not None and len(series) != expected_count:
        raise CountMismatch(
            f"{path}: {len(series)} {expected_granularity} vectors, expected {expected_count}"
        )
    return series
