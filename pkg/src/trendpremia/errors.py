"""Exception hierarchy shared by every engine module.

Each concrete error carries a stable ``code`` string so the CLI can emit a
machine-readable record and map the failure onto an exit code.
"""
from __future__ import annotations


class TrendPremiaError(Exception):
    """Base class for all engine errors."""

    code = "EngineError"
    exit_code = 1

    def __init__(self, message: str = "", **context):
        super().__init__(message or self.code)
        self.context = context

    def record(self) -> dict:
        rec = {"error": self.code, "message": str(self)}
        rec.update({k: _jsonable(v) for k, v in self.context.items()})
        return rec


def _jsonable(v):
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)


class ConfigError(TrendPremiaError):
    code = "ConfigError"
    exit_code = 2


class DataError(TrendPremiaError):
    code = "DataError"
    exit_code = 3


class NumericalError(TrendPremiaError):
    code = "NumericalError"
    exit_code = 4


def _subclass(name: str, base: type) -> type:
    return type(name, (base,), {"code": name})


# data problems
MissingFile = _subclass("MissingFile", DataError)
MalformedRow = _subclass("MalformedRow", DataError)
NonPositivePrice = _subclass("NonPositivePrice", DataError)
DuplicateObservation = _subclass("DuplicateObservation", DataError)
SeriesTooShort = _subclass("SeriesTooShort", DataError)
MisalignedDates = _subclass("MisalignedDates", DataError)
EmptyUniverse = _subclass("EmptyUniverse", DataError)
InsufficientData = _subclass("InsufficientData", DataError)
InsufficientHistory = _subclass("InsufficientHistory", DataError)
InsufficientOverlap = _subclass("InsufficientOverlap", DataError)
NoCrisisMonths = _subclass("NoCrisisMonths", DataError)
EmptySeries = _subclass("EmptySeries", DataError)
HorizonMismatch = _subclass("HorizonMismatch", DataError)
PopulationTooSmall = _subclass("PopulationTooSmall", DataError)

# invalid parameters
InvalidSpec = _subclass("InvalidSpec", ConfigError)
ParameterOutOfRange = _subclass("ParameterOutOfRange", ConfigError)
WOutOfRange = _subclass("WOutOfRange", ConfigError)
AlphaOutOfRange = _subclass("AlphaOutOfRange", ConfigError)
UnknownVariant = _subclass("UnknownVariant", ConfigError)
NegativeCost = _subclass("NegativeCost", ConfigError)
NonPositiveInput = _subclass("NonPositiveInput", ConfigError)
DimensionTooLarge = _subclass("DimensionTooLarge", ConfigError)
DimensionZero = _subclass("DimensionZero", ConfigError)

# numerical failures
NotPositiveDefinite = _subclass("NotPositiveDefinite", NumericalError)
NotSymmetric = _subclass("NotSymmetric", NumericalError)
OnesInKernel = _subclass("OnesInKernel", NumericalError)
ZeroVolatility = _subclass("ZeroVolatility", NumericalError)
ZeroVol = _subclass("ZeroVol", NumericalError)
ZeroDrawdown = _subclass("ZeroDrawdown", NumericalError)
ZeroVariance = _subclass("ZeroVariance", NumericalError)
SingularInnovation = _subclass("SingularInnovation", NumericalError)
DegenerateCovariance = _subclass("DegenerateCovariance", NumericalError)
