"""Exception types shared across the package."""


class DomainError(ValueError):
    """A value lies outside the domain of a transform (e.g. %ILI of 0)."""


class InsufficientHistoryError(ValueError):
    """Not enough history precedes the requested prediction week."""


class DegenerateFoldError(ValueError):
    pass


class ConstantSeriesError(ValueError):
    pass


class EmptyOverlapError(ValueError):
    pass


class SingularCovarianceError(ValueError):
    """Covariance is singular after shrinkage; increase the shrinkage weight."""


class SchemaError(ValueError):
    """Input file violates its schema.

    ``problems`` is a list of ``(line_number, message)`` pairs; line numbers
    are 1-based and count the header as line 1.
    """

    def __init__(self, path, problems):
        self.path = str(path)
        self.problems = list(problems)
        lines = "\n".join(f"  {self.path}:{ln}: {msg}" for ln, msg in self.problems)
        super().__init__(f"schema violations in {self.path}:\n{lines}")


class InvariantError(RuntimeError):
    """An internal consistency check failed (a bug, not bad input)."""
