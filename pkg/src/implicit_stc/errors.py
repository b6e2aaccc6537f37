"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid controller, signal or analysis parameters."""


class DomainError(ValueError):
    """Argument outside the domain of an operation (non-finite, wrong order, ...)."""


class SimulationError(RuntimeError):
    """A closed-loop run produced a non-finite state.

    Attributes:
        index: step index at which the state stopped being finite.
    """

    def __init__(self, message, index):
        super().__init__(f"{message} (step {index})")
        self.index = index
