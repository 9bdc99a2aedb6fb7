"""Exception types shared across the package."""


class TrisemiError(Exception):
    """Base class for all package errors."""


class InputError(TrisemiError, ValueError):
    """Rejected input: bad dimensions, mismatched fields, malformed files."""


class IllConditionedError(TrisemiError, ArithmeticError):
    """Diagonal moduli too close for a stable triangular eigendecomposition."""


class WordOverflowError(TrisemiError, OverflowError):
    """An entry exceeded the representable range during word evaluation."""


class InfeasibleError(TrisemiError):
    """No candidate satisfies the exponent-box / sign constraints."""


class SpanningError(TrisemiError):
    """Generator log-moduli do not positively span the space."""


class GenericityError(TrisemiError):
    """Target violates the genericity preconditions of the block factorization."""
