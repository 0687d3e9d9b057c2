"""Error types shared across the engine."""


class ToprecError(Exception):
    pass


class DomainError(ToprecError):
    """Operation applied outside its stated preconditions."""


class InsufficientPrecisionError(ToprecError):
    """A consumer asked for more exact coefficients than a truncated object carries.

    Carries ``needed`` (order that would have sufficed) when known.
    """

    def __init__(self, msg, needed=None):
        super().__init__(msg)
        self.needed = needed


class RingDivisionByNonUnit(DomainError):
    pass


class FactorizationIncompleteError(ToprecError):
    """A denominator root is missing from the supplied pole list."""


class NonSimpleBranchpointError(ToprecError):
    pass


class OffCriticalViolation(ToprecError):
    def __init__(self, msg, point=None, observed_order=None):
        super().__init__(msg)
        self.point = point
        self.observed_order = observed_order


class UnstablePairError(DomainError):
    pass


class EndpointSolveFailure(ToprecError):
    pass


class MultiCutDetected(ToprecError):
    pass


class InteractionSingularityOnCut(ToprecError):
    pass


class IndexOverflowError(DomainError):
    pass


class SizeLimitExceeded(ToprecError):
    pass


class NonCoprimeError(DomainError):
    pass


class FamilyNotDifferentiable(ToprecError):
    pass
