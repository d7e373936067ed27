"""Run configuration shared by the pipeline and the CLI."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .embedder import MAX_POOL_LENGTH, EmbedderSpec
from .errors import ConfigError

T1_MODES = ("percentile", "fixed", "all")
SCORER_KINDS = ("builtin", "external-file")


@dataclass(frozen=True)
class ScorerSpec:
    """Boundary scorer: the builtin discontinuity heuristic or an FDEB file of
    ``(s_none, s_drop, s_break)`` rows."""

    kind: str = "builtin"
    path: Optional[str] = None
    context: int = 16
    drop_z: float = 4.0
    break_z: float = 8.0
    softness: float = 0.5

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise ConfigError(f"unknown scorer kind {self.kind!r}")
        if self.kind == "external-file" and not self.path:
            raise ConfigError("external-file scorer needs a path")
        if self.context < 2:
            raise ConfigError("scorer context must be at least 2 boundaries")
        if not self.softness > 0:
            raise ConfigError("scorer softness must be positive")
        if not self.break_z > self.drop_z:
            raise ConfigError("break_z must exceed drop_z")

    @classmethod
    def from_dict(cls, d: dict) -> "ScorerSpec":
        _reject_unknown(cls, d, "scorer")
        return cls(**d)


def _reject_unknown(cls, d: dict, what: str, renames: Optional[dict] = None) -> None:
    names = {f.name for f in fields(cls)} | set((renames or {}).keys())
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple = ()
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    sequence_embedder: Optional[EmbedderSpec] = None
    t1_mode: str = "percentile"
    t1: Optional[float] = None
    t1_percentile: float = 5.0
    t2: float = 0.05
    window_length: int = 64
    overlap: int = 16
    min_window_gap: int = 1
    eps: float = 0.01
    lam: float = 0.1
    wind: int = 3
    near_band: int = 8
    max_events: int = 4
    d_floor: float = 1e-6
    scorer: ScorerSpec = field(default_factory=ScorerSpec)
    seed: int = 0
    output_dir: Optional[str] = None
    jobs: Optional[int] = None
    fps: float = 30.0
    pattern: str = "*"
    grayscale: bool = False

    def __post_init__(self):
        if self.t1_mode not in T1_MODES:
            raise ConfigError(f"t1_mode must be one of {T1_MODES}")
        if self.t1_mode == "fixed" and not (self.t1 is not None and self.t1 > 0):
            raise ConfigError("t1_mode 'fixed' needs a positive t1")
        if not 0 < self.t1_percentile <= 100:
            raise ConfigError("t1_percentile must lie in (0, 100]")
        if not 0 < self.t2 <= 1:
            raise ConfigError("t2 is a normalised distance in (0, 1]")
        if not 2 <= self.window_length <= MAX_POOL_LENGTH:
            raise ConfigError(f"window_length must lie in [2, {MAX_POOL_LENGTH}]")
        if not 0 <= self.overlap < self.window_length:
            raise ConfigError("overlap must satisfy 0 <= overlap < window_length")
        if self.min_window_gap < 1:
            raise ConfigError("min_window_gap must be at least 1")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not self.lam >= 0:
            raise ConfigError("lambda must be non-negative")
        if self.wind < 0 or self.near_band < 0:
            raise ConfigError("wind and near_band must be non-negative")
        if self.max_events < 1:
            raise ConfigError("max_events must be at least 1")
        if not self.d_floor > 0:
            raise ConfigError("d_floor must be positive")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")
        if self.embedder.kind not in ("downsample-intensity", "color-histogram", "external-file"):
            raise ConfigError("the frame embedder must be frame-capable or an external per-frame file")

    @property
    def workers(self) -> int:
        return self.jobs or os.cpu_count() or 1

    @property
    def sequence_spec(self) -> EmbedderSpec:
        return self.sequence_embedder or self.embedder

    def replace(self, **changes) -> "RunConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return RunConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = list(self.inputs)
        d["embedder"] = self.embedder.to_dict()
        d["sequence_embedder"] = self.sequence_embedder.to_dict() if self.sequence_embedder else None
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        _reject_unknown(cls, d, "config", renames={"lambda": "lam"})
        if "lam" in d and "lambda" in d:
            raise ConfigError("give either 'lambda' or 'lam', not both")
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "embedder" in d:
            d["embedder"] = EmbedderSpec.from_dict(d["embedder"])
        if d.get("sequence_embedder") is not None:
            d["sequence_embedder"] = EmbedderSpec.from_dict(d["sequence_embedder"])
        if "scorer" in d:
            d["scorer"] = ScorerSpec.from_dict(d["scorer"])
        if "inputs" in d:
            d["inputs"] = tuple(d["inputs"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)
