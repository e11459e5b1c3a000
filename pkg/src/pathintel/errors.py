"""Exception hierarchy shared across the package."""


class PathintelError(Exception):
    """Base class for all package errors."""


class ValidationError(PathintelError):
    """Invalid inputs, malformed manifests, mismatched shapes or kinds."""


class FormatError(ValidationError):
    """Corrupt or malformed CDM1 file."""


class NoSpeechError(PathintelError):
    """VAD found no voiced segments; callers skip the utterance."""
