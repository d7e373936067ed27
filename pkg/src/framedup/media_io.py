"""Frame sources and on-disk formats.

Supported inputs are PPM/PGM image sequences (PNG when Pillow is around) and
YUV4MPEG2 files. The FDEB container carries embedding or score matrices:

    b"FDEB" | u32 version | u32 count | u32 dim | count*dim float32, all little-endian
"""

from __future__ import annotations

import logging
import re
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptySequence,
    LengthMismatch,
    MalformedHeader,
    MalformedImage,
    TooFewFrames,
    TruncatedFrame,
    UnsupportedChroma,
)

log = logging.getLogger(__name__)

DEFAULT_FPS = 30.0
FDEB_MAGIC = b"FDEB"
FDEB_VERSION = 1
_FDEB_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    """One decoded frame, stored as an ``(height, width, channels)`` uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionMismatch(f"frame must be HxW, HxWx1 or HxWx3, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise MalformedImage(f"frame samples must be uint8, got {arr.dtype}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def intensity(self) -> np.ndarray:
        """Channel-mean intensity as float64, 0..255."""
        if self.channels == 1:
            return self.data[:, :, 0].astype(np.float64)
        return self.data.astype(np.float64).mean(axis=2)

    def __eq__(self, other):
        if not isinstance(other, FrameBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass
class VideoClip:
    frames: list
    fps: float = DEFAULT_FPS
    source_id: str = ""

    def __post_init__(self):
        frames = [f if isinstance(f, FrameBuffer) else FrameBuffer(f) for f in self.frames]
        if not frames:
            raise EmptySequence("a clip needs at least one frame")
        shape = frames[0].shape
        for idx, f in enumerate(frames):
            if f.shape != shape:
                raise DimensionMismatch(f"frame {idx} has shape {f.shape}, expected {shape}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps!r}")
        self.frames = frames
        self.fps = float(self.fps)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple:
        return self.frames[0].shape

    def as_array(self) -> np.ndarray:
        """Stack frames into an ``(n, height, width, channels)`` uint8 array."""
        return np.stack([f.data for f in self.frames])

    @classmethod
    def from_array(cls, arr: np.ndarray, fps: float = DEFAULT_FPS, source_id: str = "") -> "VideoClip":
        return cls([FrameBuffer(a) for a in np.asarray(arr)], fps=fps, source_id=source_id)

    def require(self, n: int) -> None:
        if len(self) < n:
            raise TooFewFrames(f"clip {self.source_id!r} has {len(self)} frames, need at least {n}")


@dataclass(frozen=True, eq=False)
class TemporalDiffFrame:
    """Signed intensity change between consecutive frames, int16 ``(height, width)``."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class EmbeddingSeries:
    """A ``(count, dim)`` block of feature vectors."""

    vectors: np.ndarray
    granularity: str = "per-frame"
    window_spec: Optional[tuple] = None
    dim: int = field(init=False)

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2:
            raise DimensionMismatch(f"embedding block must be 2-D, got shape {vecs.shape}")
        if self.granularity not in ("per-frame", "per-window"):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        self.vectors = vecs
        self.dim = vecs.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


# --------------------------------------------------------------------------- PNM

_PNM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _parse_pnm(raw: bytes, path) -> np.ndarray:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PNM_TOKEN.match(raw, pos)
        if m is None:
            raise MalformedImage(f"{path}: truncated PNM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise MalformedImage(f"{path}: unsupported PNM magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedImage(f"{path}: non-numeric PNM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 256:
        raise MalformedImage(f"{path}: unsupported PNM geometry {width}x{height} maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = raw[pos : pos + need]
    if len(payload) != need:
        raise MalformedImage(f"{path}: raster has {len(payload)} bytes, expected {need}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    if maxval != 255:
        arr = np.rint(arr.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    return arr


def read_image(path) -> FrameBuffer:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        try:
            from PIL import Image
        except ImportError as exc:  # pragma: no cover - Pillow is optional
            raise MalformedImage(f"{path}: PNG support needs Pillow") from exc
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            return FrameBuffer(np.asarray(im, dtype=np.uint8))
    return FrameBuffer(_parse_pnm(path.read_bytes(), path))


def write_pnm(path, frame) -> None:
    """Write a frame as binary PGM (1 channel) or PPM (3 channels)."""
    fb = frame if isinstance(frame, FrameBuffer) else FrameBuffer(np.asarray(frame))
    magic = b"P5" if fb.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, fb.width, fb.height)
    Path(path).write_bytes(header + fb.data.tobytes())


def read_image_sequence(dir_path, pattern: str = "*", fps: float = DEFAULT_FPS) -> VideoClip:
    root = Path(dir_path)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    files = sorted(p for p in root.glob(pattern) if p.is_file())
    if not files:
        raise EmptySequence(f"no files in {root} match {pattern!r}")
    frames = [read_image(p) for p in files]
    shape = frames[0].shape
    for p, f in zip(files, frames):
        if f.shape != shape:
            raise DimensionMismatch(f"{p.name} has shape {f.shape}, first frame is {shape}")
    return VideoClip(frames, fps=fps, source_id=str(root))


# --------------------------------------------------------------------------- Y4M

_CHROMA_420 = {"420", "420jpeg", "420paldv", "420mpeg2"}


def _y4m_params(line: bytes, path) -> dict:
    parts = line.split(b" ")
    if parts[0] != b"YUV4MPEG2":
        raise MalformedHeader(f"{path}: missing YUV4MPEG2 signature")
    params: dict = {"X": []}
    for p in parts[1:]:
        if not p:
            continue
        key, val = chr(p[0]), p[1:].decode("ascii", "replace")
        if key == "X":
            params["X"].append(val)
        else:
            params[key] = val
    return params


def _yuv_to_rgb(y, u, v, full_range: bool) -> np.ndarray:
    y = y.astype(np.float64)
    cb = u.astype(np.float64) - 128.0
    cr = v.astype(np.float64) - 128.0
    if full_range:
        r = y + 1.402 * cr
        g = y - 0.344136 * cb - 0.714136 * cr
        b = y + 1.772 * cb
    else:
        yy = (y - 16.0) * (255.0 / 219.0)
        r = yy + 1.596027 * cr
        g = yy - 0.391762 * cb - 0.812968 * cr
        b = yy + 2.017232 * cb
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def _rgb_to_yuv_full(rgb: np.ndarray):
    f = rgb.astype(np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    u = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    v = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    clip = lambda a: np.clip(np.rint(a), 0, 255).astype(np.uint8)  # noqa: E731
    return clip(y), clip(u), clip(v)


def parse_fps(token: str) -> float:
    try:
        num, den = token.split(":")
        rate = Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError):
        raise MalformedHeader(f"bad frame-rate token F{token}") from None
    if rate <= 0:
        raise MalformedHeader(f"non-positive frame rate F{token}")
    return float(rate)


def read_y4m(path, grayscale: bool = False) -> VideoClip:
    """Decode a YUV4MPEG2 file (C420 variants, C444, Cmono) into RGB or luma frames.

    Colour conversion is BT.601; full range when the header carries
    ``XCOLORRANGE=FULL``, studio range otherwise.
    """
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise MalformedHeader(f"{path}: no header line")
    params = _y4m_params(raw[:nl], path)
    try:
        width, height = int(params["W"]), int(params["H"])
    except (KeyError, ValueError):
        raise MalformedHeader(f"{path}: missing or invalid W/H") from None
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"{path}: invalid geometry {width}x{height}")
    fps = parse_fps(params["F"]) if "F" in params else DEFAULT_FPS
    chroma = params.get("C", "420jpeg")
    if chroma in _CHROMA_420:
        cw, ch = (width + 1) // 2, (height + 1) // 2
    elif chroma == "444":
        cw, ch = width, height
    elif chroma == "mono":
        cw = ch = 0
    else:
        raise UnsupportedChroma(f"{path}: chroma C{chroma} not supported")
    full_range = any(x.upper() == "COLORRANGE=FULL" for x in params["X"])

    luma = width * height
    frame_bytes = luma + 2 * cw * ch
    frames = []
    pos = nl + 1
    while pos < len(raw):
        fnl = raw.find(b"\n", pos)
        if fnl < 0 or not raw.startswith(b"FRAME", pos):
            raise TruncatedFrame(f"{path}: bad or truncated FRAME marker at byte {pos}")
        start = fnl + 1
        payload = raw[start : start + frame_bytes]
        if len(payload) != frame_bytes:
            raise TruncatedFrame(
                f"{path}: frame {len(frames)} has {len(payload)} of {frame_bytes} bytes"
            )
        buf = np.frombuffer(payload, dtype=np.uint8)
        y = buf[:luma].reshape(height, width)
        if grayscale or chroma == "mono":
            if grayscale:
                frames.append(FrameBuffer(y.copy()))
            else:
                frames.append(FrameBuffer(np.repeat(y[:, :, None], 3, axis=2)))
        else:
            u = buf[luma : luma + cw * ch].reshape(ch, cw)
            v = buf[luma + cw * ch :].reshape(ch, cw)
            if chroma != "444":
                u = np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)[:height, :width]
                v = np.repeat(np.repeat(v, 2, axis=0), 2, axis=1)[:height, :width]
            frames.append(FrameBuffer(_yuv_to_rgb(y, u, v, full_range)))
        pos = start + frame_bytes
    if not frames:
        raise EmptySequence(f"{path}: no frames")
    return VideoClip(frames, fps=fps, source_id=str(path))


def write_y4m(path, clip: VideoClip, fps: Optional[Fraction] = None) -> None:
    """Write a clip as C444 (colour) or Cmono (single channel), full-range BT.601."""
    rate = Fraction(clip.fps).limit_denominator(1001) if fps is None else Fraction(fps)
    h, w, c = clip.shape
    chroma = "mono" if c == 1 else "444"
    header = f"YUV4MPEG2 W{w} H{h} F{rate.numerator}:{rate.denominator} Ip A1:1 C{chroma} XCOLORRANGE=FULL\n"
    chunks = [header.encode("ascii")]
    for f in clip.frames:
        chunks.append(b"FRAME\n")
        if c == 1:
            chunks.append(f.data.tobytes())
        else:
            y, u, v = _rgb_to_yuv_full(f.data)
            chunks.extend((y.tobytes(), u.tobytes(), v.tobytes()))
    Path(path).write_bytes(b"".join(chunks))


def read_clip(path, pattern: str = "*", fps: float = DEFAULT_FPS, grayscale: bool = False) -> VideoClip:
    """Open a Y4M file or an image-sequence directory."""
    p = Path(path)
    if p.is_dir():
        return read_image_sequence(p, pattern, fps=fps)
    if not p.exists():
        raise FileNotFoundError(str(p))
    return read_y4m(p, grayscale=grayscale)


# --------------------------------------------------------------------------- diffs

def rounded_intensity(frame: FrameBuffer) -> np.ndarray:
    return np.rint(frame.intensity()).astype(np.int16)


def temporal_diffs(clip: VideoClip) -> list:
    if len(clip) < 2:
        raise TooFewFrames("temporal differences need at least 2 frames")
    levels = [rounded_intensity(f) for f in clip.frames]
    return [TemporalDiffFrame(b - a) for a, b in zip(levels[:-1], levels[1:])]


# --------------------------------------------------------------------------- FDEB

def write_embeddings(path, series) -> None:
    vectors = series.vectors if isinstance(series, EmbeddingSeries) else np.asarray(series)
    vectors = np.asarray(vectors)
    if vectors.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D block, got shape {vectors.shape}")
    count, dim = vectors.shape
    if dim < 1:
        raise DimensionMismatch("dim must be at least 1")
    payload = np.ascontiguousarray(vectors, dtype="<f4").tobytes()
    Path(path).write_bytes(_FDEB_HEADER.pack(FDEB_MAGIC, FDEB_VERSION, count, dim) + payload)


def read_fdeb(path) -> np.ndarray:
    """Return the raw ``(count, dim)`` float32 block of an FDEB file."""
    raw = Path(path).read_bytes()
    if len(raw) < _FDEB_HEADER.size:
        raise LengthMismatch(f"{path}: shorter than the FDEB header")
    magic, version, count, dim = _FDEB_HEADER.unpack_from(raw)
    if magic != FDEB_MAGIC:
        raise BadMagic(f"{path}: magic {magic!r} is not {FDEB_MAGIC!r}")
    if version != FDEB_VERSION:
        raise BadMagic(f"{path}: unsupported FDEB version {version}")
    if dim < 1:
        raise LengthMismatch(f"{path}: dim must be at least 1")
    body = raw[_FDEB_HEADER.size :]
    if len(body) != count * dim * 4:
        raise LengthMismatch(f"{path}: header declares {count}x{dim} floats, payload holds {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(count, dim)


def read_embeddings(path, granularity: str = "per-frame", window_spec=None) -> EmbeddingSeries:
    return EmbeddingSeries(read_fdeb(path).astype(np.float64), granularity, window_spec)


# --------------------------------------------------------------------------- heatmaps

def heatmap_pgm(path, values: np.ndarray, vmin: Optional[float] = None, vmax: Optional[float] = None) -> None:
    """Render a real matrix as an 8-bit PGM; low values dark, unknown (NaN/inf) white."""
    vals = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(vals)
    lo = float(vals[finite].min()) if vmin is None and finite.any() else (vmin or 0.0)
    hi = float(vals[finite].max()) if vmax is None and finite.any() else (vmax if vmax is not None else 1.0)
    span = hi - lo if hi > lo else 1.0
    img = np.full(vals.shape, 255, dtype=np.uint8)
    img[finite] = np.clip(np.rint((vals[finite] - lo) / span * 255.0), 0, 255).astype(np.uint8)
    write_pnm(path, img)


def stack_frames(frames: Iterable[np.ndarray], fps: float = DEFAULT_FPS, source_id: str = "") -> VideoClip:
    return VideoClip([FrameBuffer(np.asarray(f, dtype=np.uint8)) for f in frames], fps=fps, source_id=source_id)


def frames_equal(a: Sequence[FrameBuffer], b: Sequence[FrameBuffer]) -> bool:
    return len(a) == len(b) and all(x == y for x, y in zip(a, b))
