"""Exception types raised across the toolkit."""

from __future__ import annotations


class FrameDupError(Exception):
    """Base class for every error raised by framedup."""


# media / decoding
class EmptySequence(FrameDupError, ValueError):
    pass


class DimensionMismatch(FrameDupError, ValueError):
    pass


class MalformedImage(FrameDupError, ValueError):
    pass


class MalformedHeader(FrameDupError, ValueError):
    pass


class UnsupportedChroma(FrameDupError, ValueError):
    pass


class TruncatedFrame(FrameDupError, ValueError):
    pass


class TooFewFrames(FrameDupError, ValueError):
    pass


class BadMagic(FrameDupError, ValueError):
    pass


class LengthMismatch(FrameDupError, ValueError):
    pass


# embedding
class IncompatibleKind(FrameDupError, ValueError):
    pass


class WindowOutOfBounds(FrameDupError, IndexError):
    pass


class CountMismatch(FrameDupError, ValueError):
    pass


class DimMismatch(FrameDupError, ValueError):
    pass


# search
class DegenerateGap(FrameDupError, ValueError):
    pass


# generation
class OverlapViolation(FrameDupError, ValueError):
    pass


class RangeOutOfBounds(FrameDupError, ValueError):
    pass


class InsufficientFrames(FrameDupError, ValueError):
    pass


# evaluation / config
class SingleClass(FrameDupError, ValueError):
    pass


class ConfigError(FrameDupError, ValueError):
    pass


class SchemaError(FrameDupError, ValueError):
    pass
