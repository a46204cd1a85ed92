"""Exception hierarchy shared by all modules."""


class DephaseLabError(Exception):
    """Base class for every error raised by the package."""


class ModelError(DephaseLabError, ValueError):
    """Invalid model, state or dimension mismatch."""


class NotInvertible(DephaseLabError):
    """A dephasing function vanishes where an inverse is required."""


class BudgetError(DephaseLabError):
    """Tuple enumeration would exceed the evaluation budget."""


class DivergentIntegral(DephaseLabError):
    """An integral required by the chosen form factors does not converge."""


class KindError(DephaseLabError, TypeError):
    """Operation not available for the given form-factor kind."""


class LeakageError(DephaseLabError):
    """Truncated Fock space is too small for the requested evolution."""


class UnsupportedCase(DephaseLabError, ValueError):
    """Arguments fall outside the cases with a known closed form."""


class AccuracyError(DephaseLabError):
    """Requested tolerance cannot be met with the given resources."""


class ScenarioError(DephaseLabError, ValueError):
    """Malformed scenario or model file."""
