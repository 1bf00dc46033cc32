"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """Base class for numerical failures that callers should surface."""


class NoConvergence(NumericalError):
    """An iterative solver hit its iteration cap without a verdict."""


class Unbounded(NumericalError):
    """A one-dimensional conjugate is +inf (the supremum escapes to infinity)."""


class DegenerateWeights(NumericalError):
    """Importance weights collapsed onto too few trials to be trusted."""


class NoFiniteRate(NumericalError):
    """A tilt plan was requested at a level with infinite rate."""


class InsufficientCells(ValueError):
    """Too few usable n-cells to fit a log-probability slope."""


class EmptyDomain(ValueError):
    """A tabulated function has no finite values."""


class NotExtremalAtom(ValueError):
    """The point is not an extremal atom of the support's convex hull."""


class ConfigError(ValueError):
    """Invalid user configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
