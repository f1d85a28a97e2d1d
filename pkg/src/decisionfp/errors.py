"""Exception hierarchy shared by all modules."""


class DecisionFPError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(DecisionFPError):
    """A numerical procedure could not deliver a trustworthy result."""


class NoEquilibriumFound(NumericalError):
    pass


class NewtonDivergence(NumericalError):
    pass


class UnstableStep(NumericalError):
    """An Euler-Maruyama step moved a particle further than the domain diameter."""


class AllCensored(NumericalError):
    pass


class CflViolation(NumericalError):
    pass


class SolverDivergence(NumericalError):
    pass


class SingularTransform(NumericalError):
    pass


class ComplexEigenvalues(NumericalError):
    pass


class NoSaddle(NumericalError):
    pass


class RootNotBracketed(NumericalError):
    def __init__(self, index, y):
        super().__init__(f"fast nullcline root not bracketed at index {index} (y={y:.6g})")
        self.index = index
        self.y = y


class DegenerateMass(NumericalError):
    pass


class NoWells(NumericalError):
    pass


class InvalidGeometry(DecisionFPError, ValueError):
    pass


class ConfigError(DecisionFPError):
    """Base for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.line = line
        self.key = key


class ValidationError(ConfigError, ValueError):
    def __init__(self, field, message="invalid value"):
        super().__init__(f"{field}: {message}")
        self.field = field


class MissingArtifact(DecisionFPError):
    pass
