"""Exception types raised across the package."""


class CtqError(Exception):
    """Base class for all package errors."""


class DegenerateSample(CtqError, ValueError):
    """Training samples carry no spread to fit a compander on."""


class NonConvergence(CtqError, RuntimeError):
    """An iterative fit exhausted its iteration budget."""


class ZeroVector(CtqError, ValueError):
    """A CSI frame (or reconstruction) has zero norm."""


class MalformedFrame(CtqError, ValueError):
    """A quantized frame violates the special-symbol layout."""


class MissingFallback(CtqError, ValueError):
    """A symbol needs the low-resolution codeword but none was supplied."""


class TruncatedStream(CtqError, EOFError):
    """The bit reader ran out of bits mid-codeword."""


class DesyncDetected(CtqError, RuntimeError):
    """Decoder state diverged from what the encoder could have produced."""


class FormatError(CtqError, ValueError):
    """A file or container does not match the expected binary layout."""
