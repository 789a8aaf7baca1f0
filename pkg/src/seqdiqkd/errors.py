"""Exception hierarchy shared by the library and the CLI."""


class DomainError(ValueError):
    """A parameter lies outside its admissible interval."""

    def __init__(self, name, value, interval):
        self.name = name
        self.value = value
        self.interval = interval
        super().__init__(f"{name}={value!r} outside admissible interval {interval}")


class NumericalIntegrityError(ArithmeticError):
    """A numerical invariant (trace, positivity, reality) was violated beyond tolerance."""


class UndefinedEstimateError(RuntimeError):
    """A statistical estimate was requested from an empty set of rounds."""
