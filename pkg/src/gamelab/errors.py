"""Exception types shared across the package."""


class GameLabError(Exception):
    """Base class for all package errors."""


class NotFoundError(GameLabError):
    """Unknown scenario or registry entry."""


class InvalidArgumentError(GameLabError):
    """Malformed argument (bad partition, structural override, ...)."""


class DomainViolationError(GameLabError):
    """An action falls outside its action set."""


class InvalidStateError(GameLabError):
    """Operation requires state the object does not carry (e.g. stored noise)."""


class NumericalBlowupError(GameLabError):
    """NaN/Inf appeared during simulation."""

    def __init__(self, step, msg=None):
        self.step = step
        super().__init__(msg or f"non-finite state at step {step}")


class StabilityViolationError(GameLabError):
    """Explicit-scheme stability bound violated."""

    def __init__(self, required_n_t, msg=None):
        self.required_n_t = required_n_t
        detail = f"need n_t >= {required_n_t}" if required_n_t else "no stable n_t at this spatial grid"
        super().__init__(msg or f"time step too large for positive coefficients; {detail}")


class ConstraintEmptyError(GameLabError):
    """The volatility-constrained action set is empty on the grid."""


class RegressionDegenerateError(GameLabError):
    """Rank-deficient regression design matrix."""

    def __init__(self, step, msg=None):
        self.step = step
        super().__init__(msg or f"degenerate regression design at step {step}")


class ContractionViolationError(GameLabError):
    """Driver Lipschitz constant times the time step is >= 1."""


class NoSaddleFieldError(GameLabError):
    """Upper and lower PDE solutions disagree beyond tolerance."""
