# sampler/errors.py


class PTWalkError(Exception):
    """Base for every error the toolkit raises on purpose."""


class InputError(PTWalkError, ValueError):
    pass


class ConfigError(PTWalkError, ValueError):
    pass


class InitError(PTWalkError):
    pass


class GradientError(PTWalkError, ArithmeticError):
    """The gradient variant cannot be used at this state (non-finite ∇ log π)."""


class DataError(PTWalkError):
    pass


class SamplerFailure(PTWalkError):
    """Rejection sampler hit its trial cap."""

    def __init__(self, trials: int):
        super().__init__(f"penalised proposal not accepted after {trials} trials")
        self.trials = trials
