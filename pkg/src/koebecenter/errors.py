"""Exception types shared across the package."""


class KoebeError(Exception):
    """Base class for all package errors."""


class DomainError(KoebeError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class OrientationError(DomainError):
    """A pole does not describe a cap with radius below pi/2."""


class DegeneracyError(KoebeError, ArithmeticError):
    """A linear system or direction is singular or too ill-conditioned."""


class CombinatoricsError(KoebeError, ValueError):
    """Face cycles do not describe a closed polyhedral surface of genus 0."""


class InvalidSystemError(KoebeError, ValueError):
    """A cap system fails validation."""


class SpecMismatchError(KoebeError, ValueError):
    """A center functional is not applicable to the given combinatorics."""


class DocumentError(KoebeError, ValueError):
    """A document is malformed or violates its schema."""
