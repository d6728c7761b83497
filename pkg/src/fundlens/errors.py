"""Exception types shared across fundlens modules."""


class FundlensError(Exception):
    """Base class for all fundlens-specific errors."""


class ImageDecodeError(FundlensError):
    """Raised when a PNG/JPEG file cannot be decoded. Carries the file path."""

    def __init__(self, path, reason=""):
        self.path = str(path)
        msg = f"cannot decode image file {self.path}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class CascadeFormatError(FundlensError):
    """Raised when a cascade XML file is malformed or violates invariants."""


class DictionaryFormatError(FundlensError):
    """Raised on malformed dictionary files. Carries the offending line number."""

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ConfigError(FundlensError):
    """Raised on invalid or missing configuration (files, keys, model paths)."""


class AnnotationError(FundlensError):
    """Base class for annotation-provider failures."""


class AnnotationAuthError(AnnotationError):
    """Provider rejected the supplied credentials."""


class AnnotationRateLimitError(AnnotationError):
    """Provider rate limit still exceeded after retries."""


class AnnotationNetworkError(AnnotationError):
    """Network failure (timeout, connection refused, bad response)."""


class ConvergenceError(FundlensError):
    """An iterative solver failed to converge; message carries diagnostics."""
