"""Exception types raised across the package."""


class BlochHomError(Exception):
    """Base class for all package errors."""


class NotSymmetric(BlochHomError, ValueError):
    pass


class NotElliptic(BlochHomError, ValueError):
    pass


class BadDimension(BlochHomError, ValueError):
    pass


class EtaOutOfCell(BlochHomError, ValueError):
    pass


class GardingViolation(BlochHomError, ArithmeticError):
    pass


class EigensolverFailure(BlochHomError, ArithmeticError):
    pass


class DegenerateGauge(BlochHomError, ArithmeticError):
    """Constant-mode amplitude of a first-band eigenvector is too small to pin."""


class SingularSystem(BlochHomError, ArithmeticError):
    pass


class CompatibilityViolation(BlochHomError, ArithmeticError):
    pass


class StepTooLarge(BlochHomError, ArithmeticError):
    pass


class IncommensurateGrid(BlochHomError, ValueError):
    pass


class RegimeMismatch(BlochHomError, ValueError):
    pass


class ConfigInvalid(BlochHomError, ValueError):
    pass
