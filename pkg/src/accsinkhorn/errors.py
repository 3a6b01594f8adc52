"""Exception types raised across the package."""


class OTError(Exception):
    """Base class for all errors raised by accsinkhorn."""


class InvalidProblem(OTError, ValueError):
    """Marginals or cost matrix violate the transport-problem invariants."""


class PotentialOverflow(OTError, FloatingPointError):
    """An exponent exceeded the configured overflow bound."""


class NonPositiveEntry(OTError, ValueError):
    pass


class DomainViolation(OTError, ValueError):
    """Argument outside the domain of the conjugate mirror map (xi <= -b)."""


class GaugeViolation(OTError, ValueError):
    """A vector expected to lie in the zero-sum subspace does not."""


class DimensionTooLarge(OTError, ValueError):
    pass


class OracleUnavailable(OTError):
    """The brute-force OT oracle does not cover this instance."""


class ImageTooSmall(OTError, ValueError):
    pass


class MalformedLine(OTError, ValueError):
    def __init__(self, path, lineno, reason):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno


class VocabularyTooSmall(OTError, ValueError):
    pass


class ZeroVector(OTError, ValueError):
    pass


class DegenerateColumn(OTError, ValueError):
    pass


class EmptyDictionary(OTError, ValueError):
    pass


class DuplicateWord(UserWarning):
    """Emitted when a word-vector file repeats a word; the first entry wins."""
