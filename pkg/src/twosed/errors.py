"""Exception hierarchy shared by every module of the package."""


class TwoSEDError(Exception):
    """Base class for all errors raised by twosed."""


class InvalidMatrix(TwoSEDError, ValueError):
    """A matrix contains non-finite entries or is not square."""


class NotPSD(TwoSEDError, ValueError):
    """A spectrum has a negative eigenvalue beyond the clamping tolerance."""


class DimError(TwoSEDError, ValueError):
    """Operand dimensions do not agree."""


class ParseError(TwoSEDError, ValueError):
    """Malformed text input (model strings, CSV cells)."""

    def __init__(self, message, position=None, row=None, col=None):
        self.position = position
        self.row = row
        self.col = col
        where = []
        if position is not None:
            where.append(f"position {position}")
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"column {col}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ShapeError(TwoSEDError, ValueError):
    """Tensor shapes do not compose."""


class InvalidVariance(TwoSEDError, ValueError):
    """Block noise variance is not strictly positive."""


class DomainError(TwoSEDError, ValueError):
    """Scale parameters lie outside their admissible range."""


class FormatError(TwoSEDError, ValueError):
    """Binary file does not follow the expected layout."""


class LabelError(TwoSEDError, ValueError):
    """Class label outside [0, n_classes)."""


class DivergedError(TwoSEDError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")


class TooLarge(TwoSEDError, ValueError):
    """Brute-force routine asked to work beyond its size limit."""


class CheckFailed(TwoSEDError, AssertionError):
    """A verification check did not hold; carries the report."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
