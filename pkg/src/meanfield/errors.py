"""Exception hierarchy shared by all modules."""


class MeanFieldError(Exception):
    """Base class for every error raised by the package."""


# expressions

class ParseError(MeanFieldError):
    pass


class ExprSyntaxError(ParseError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ParseError):
    def __init__(self, name):
        super().__init__(f"unknown identifier {name!r}")
        self.name = name


class EvaluationError(MeanFieldError):
    pass


class DivisionByZero(EvaluationError, ZeroDivisionError):
    pass


class DomainError(EvaluationError, ValueError):
    pass


# models

class ModelError(MeanFieldError):
    pass


class SchemaError(ModelError):
    pass


class EmptyJumps(SchemaError):
    pass


class UnknownModel(ModelError):
    pass


class MissingParam(ModelError):
    pass


class OutOfDomain(ModelError):
    pass


class NegativeRate(ModelError):
    pass


# simulation

class SimulationError(MeanFieldError):
    pass


class OffLattice(SimulationError):
    pass


class Escape(SimulationError):
    pass


class GridMismatch(MeanFieldError, ValueError):
    pass


# numerics and bounds

class NonFinite(MeanFieldError, ArithmeticError):
    pass


class BoundViolated(MeanFieldError):
    pass


class ConfigError(MeanFieldError, ValueError):
    pass
