"""Exception types shared across the codec."""


class MdqError(Exception):
    """Base class for codec errors."""


class FormatError(MdqError):
    """Stream does not look like a description (bad magic, version, or counts)."""


class TruncatedStreamError(FormatError):
    """Stream ended before all declared bytes were available."""


class LengthMismatchError(FormatError):
    """Declared payload lengths disagree with the actual stream size."""


class InconsistentPairError(MdqError):
    """Two descriptions that cannot belong to the same image."""
