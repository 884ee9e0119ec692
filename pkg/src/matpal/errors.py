"""Exception hierarchy shared across the toolkit."""


class MatpalError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(MatpalError, ValueError):
    """Input violates a documented precondition (non-finite, out of range...)."""


class ShapeError(MatpalError, ValueError):
    """Array shapes do not agree with each other or with the contract."""


class EmptyRegionError(MatpalError, ValueError):
    """A region mask has no inside pixels."""


class RegionTooFragmentedError(MatpalError, RuntimeError):
    """No crop window reached the required mask coverage."""


class CoverageError(MatpalError, ValueError):
    """A canvas pixel is not covered by any patch."""

    def __init__(self, x: int, y: int):
        self.x, self.y = x, y
        super().__init__(f"no patch covers canvas pixel (x={x}, y={y})")


class BackendError(MatpalError, RuntimeError):
    """The texture generation backend failed or is unreachable."""

    def __init__(self, message: str, retryable: bool = False, code: str | None = None):
        self.retryable = retryable
        self.code = code
        super().__init__(message)


class EmptyLibraryError(MatpalError, ValueError):
    """A material library directory yielded zero complete materials."""


class UndefinedRatioError(MatpalError, ZeroDivisionError):
    """A relative metric hit a zero baseline entry."""
