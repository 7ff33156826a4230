"""Exception types shared across the package.

Every invariant violation raises a typed error instead of clamping or
silently repairing values; callers that want soft behaviour must opt in
explicitly (e.g. the lenient volume loader).
"""

from __future__ import annotations


class DrusenUQError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DrusenUQError):
    """A domain type's invariants were violated at construction."""


class NonFiniteValue(ValidationError):
    def __init__(self, pixel: int, value: float):
        self.pixel = pixel
        self.value = value
        super().__init__(f"non-finite value {value!r} at pixel {pixel}")


class OutOfRange(ValidationError):
    def __init__(self, pixel: int, value: float):
        self.pixel = pixel
        self.value = value
        super().__init__(f"value {value!r} at pixel {pixel} outside [0, 1]")


class SumNotOne(ValidationError):
    def __init__(self, pixel: int, total: float):
        self.pixel = pixel
        self.total = total
        super().__init__(f"class probabilities at pixel {pixel} sum to {total!r}, not 1")


class ShapeMismatch(DrusenUQError):
    pass


class EmptyVolume(ValidationError):
    pass


class WindowTooLarge(DrusenUQError):
    pass


class CountMismatch(DrusenUQError):
    pass


class DegenerateSeries(DrusenUQError):
    """Correlation requested on a constant or too-short series."""


class DrusenOutOfBounds(ValidationError):
    pass


class MalformedHeader(DrusenUQError):
    pass


class MalformedMask(DrusenUQError):
    pass


class UnsupportedDtype(DrusenUQError):
    pass


class IoFailure(DrusenUQError):
    pass
