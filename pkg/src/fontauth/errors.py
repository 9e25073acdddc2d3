"""Exception hierarchy shared across the toolkit.

Everything raised intentionally by fontauth derives from FontAuthError so
the CLI can map failures onto its exit-code contract (usage=1, data=2,
check failure=3).
"""


class FontAuthError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FontAuthError, ValueError):
    """A configuration object violates one of its invariants."""


class FontLoadError(FontAuthError):
    """A font file could not be opened or parsed."""


class MissingGlyph(FontAuthError):
    """The font has no glyph for the requested character."""


class EmptyFontSet(FontAuthError):
    """A registry role required for the operation has no fonts."""


class FormatError(FontAuthError):
    """A container file has the wrong magic bytes or format version."""


class ChecksumError(FontAuthError):
    """A container file failed its CRC32 integrity check."""


class ShapeError(FontAuthError, ValueError):
    """An array does not have the geometry the operation requires."""


class CodecError(FontAuthError, ValueError):
    """A label or probability vector is inconsistent with the codec."""


class TrainingDiverged(FontAuthError):
    """Training produced a non-finite loss and was aborted."""


class MetricError(FontAuthError, ValueError):
    """A metric is undefined for the given counts (empty denominator)."""
