"""
Error hierarchy
Every failure carries a detail message and the exit status the CLI reports
"""
from typing import Any, Optional

CHECK_FAILURE = 1
CONFIG_ERROR = 2


class DualbenchError(Exception):
    """Base error: status is the process exit code, detail the message"""

    status: int = CHECK_FAILURE

    def __init__(self, detail: str, witness: Optional[Any] = None):
        super().__init__(detail)
        self.detail = detail
        self.witness = witness

    def __str__(self) -> str:
        if self.witness is None:
            return self.detail
        return f"{self.detail} (witness: {self.witness})"


# lattice
class NegativeRate(DualbenchError):
    pass


class AsymmetricKernel(DualbenchError):
    pass


class SelfLoop(DualbenchError):
    pass


class UnknownBoundarySite(DualbenchError):
    pass


# algebra
class InvalidSpin(DualbenchError):
    pass


class CutoffTooSmall(DualbenchError):
    pass


class DimensionMismatch(DualbenchError):
    pass


class NotNilpotentOrTriangular(DualbenchError):
    pass


class IndexOutOfRange(DualbenchError):
    pass


# models
class EmptySector(DualbenchError):
    pass


class MissingReservoirParam(DualbenchError):
    pass


class MissingSinks(DualbenchError):
    pass


class InvalidM(DualbenchError):
    pass


# polyops
class UnknownVariable(DualbenchError):
    pass


class UnsupportedModel(DualbenchError):
    pass


class CutoffExceeded(DualbenchError):
    pass


class NotExpressibleInEnergy(DualbenchError):
    pass


# duality
class NotReversible(DualbenchError):
    pass


class NotASymmetry(DualbenchError):
    pass


class NotAConjugation(DualbenchError):
    pass


class CommutatorNonzero(DualbenchError):
    pass


class UnknownSink(DualbenchError):
    pass


# simulate
class RateOverflow(DualbenchError):
    pass


class InvalidDt(DualbenchError):
    pass


class NegativeEnergy(DualbenchError):
    pass


class NotAbsorbable(DualbenchError):
    pass


class MaxEventsExceeded(DualbenchError):
    pass


class LambdaOutOfRange(DualbenchError):
    pass


# verify
class NotLumpable(DualbenchError):
    pass


class SectorTooLarge(DualbenchError):
    pass


# cli
class ConfigParse(DualbenchError):
    status = CONFIG_ERROR


class SchemaViolation(DualbenchError):
    status = CONFIG_ERROR


class CheckFailed(DualbenchError):
    pass
