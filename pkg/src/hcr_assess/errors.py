"""Exception hierarchy. ``exit_code`` is what the CLI returns for each class."""


class HcrError(Exception):
    exit_code = 1


class SchemaError(HcrError):
    """Input file header or structure does not match the documented schema."""


class PreconditionError(HcrError):
    """A statistical or numerical precondition failed."""

    exit_code = 2


class DegenerateSystemError(PreconditionError):
    pass


class NestingError(PreconditionError):
    pass


class ConstantSeriesError(PreconditionError):
    pass


class InsufficientDataError(PreconditionError):
    pass


class DegenerateIndicatorError(PreconditionError):
    pass


class AggregationError(HcrError):
    """Requested period missing, or nothing left to aggregate."""


class AmbiguousMatchError(HcrError):
    exit_code = 3

    def __init__(self, raw_affiliations):
        self.raw_affiliations = list(raw_affiliations)
        shown = ", ".join(repr(r) for r in self.raw_affiliations[:5])
        more = len(self.raw_affiliations) - 5
        if more > 0:
            shown += f" (+{more} more)"
        super().__init__(f"unresolved ambiguous affiliations: {shown}")
