"""Exception types raised across the package."""


class ModelError(ValueError):
    """Base class for invalid inputs or degenerate model configurations."""


class NonStochasticMatrix(ModelError):
    pass


class Reducible(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class DegenerateP_S(ModelError):
    """Scheduling-success probability of zero collapses the generator closed forms."""


class AbsorbingQueue(ModelError):
    pass


class ZeroArrivalRate(ModelError):
    pass


class InvalidWindow(ModelError):
    pass


class InvalidParams(ModelError):
    pass


class NoConvergence(RuntimeError):
    pass


class InfeasibleScenario(ModelError):
    pass


class PoolExhausted(ModelError):
    pass


class DivergentLiteral(ModelError):
    pass


class OutOfRange(ModelError):
    pass


class InvalidDuration(ModelError):
    pass


class ParseError(ValueError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class MalformedCSV(ValueError):
    pass
