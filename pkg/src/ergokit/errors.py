"""Typed errors with stable machine-readable codes.

Every failure mode of the engine carries a code from the fixed vocabulary
below; the CLI maps codes to exit statuses.  Errors never carry approximate
data: witnesses are exact intervals or scalars.
"""

from __future__ import annotations


class ErgoError(Exception):
    """Base class; ``code`` is a stable identifier, ``witness`` optional exact data."""

    code = "ERGO_ERROR"

    def __init__(self, message: str = "", witness=None):
        super().__init__(message or self.code)
        self.witness = witness


class DivisionByZero(ErgoError):
    code = "DIVISION_BY_ZERO"


class FieldMismatch(ErgoError):
    code = "FIELD_MISMATCH"


class ParseError(ErgoError):
    code = "PARSE_ERROR"


class OutOfRange(ErgoError):
    code = "OUT_OF_RANGE"


class IncommensurablePeriods(ErgoError):
    code = "INCOMMENSURABLE_PERIODS"


class NotIncreasing(ErgoError):
    code = "NOT_INCREASING"


class InfiniteSupremum(ErgoError):
    code = "INFINITE_SUPREMUM"


class DomainGap(ErgoError):
    code = "DOMAIN_GAP"


class DomainOverlap(ErgoError):
    code = "DOMAIN_OVERLAP"


class ImageGap(ErgoError):
    code = "IMAGE_GAP"


class ImageOverlap(ErgoError):
    code = "IMAGE_OVERLAP"


class CompositionOutOfClass(ErgoError):
    code = "COMPOSITION_OUT_OF_CLASS"


class NotAPartition(ErgoError):
    code = "NOT_A_PARTITION"


class DomainRangeMismatch(ErgoError):
    code = "DOMAIN_RANGE_MISMATCH"


class Overlap(ErgoError):
    code = "OVERLAP"


class MeasureMismatch(ErgoError):
    code = "MEASURE_MISMATCH"


class NotSubset(ErgoError):
    code = "NOT_SUBSET"


class NotInvolution(ErgoError):
    code = "NOT_INVOLUTION"


class UnsupportedAperiodic(ErgoError):
    code = "UNSUPPORTED_APERIODIC"


class OutOfClass(ErgoError):
    code = "OUT_OF_CLASS"


class NotConservative(ErgoError):
    code = "NOT_CONSERVATIVE"


class NotAperiodic(ErgoError):
    code = "NOT_APERIODIC"


class BudgetExhausted(ErgoError):
    code = "BUDGET_EXHAUSTED"


class ClassificationIncomplete(ErgoError):
    code = "CLASSIFICATION_INCOMPLETE"


class CInfinite(ErgoError):
    code = "C_INFINITE"


class InfiniteSupport(ErgoError):
    code = "INFINITE_SUPPORT"


class ValidationError(ErgoError):
    code = "VALIDATION_ERROR"


class UnknownName(ErgoError):
    code = "UNKNOWN_NAME"


# Exit-code mapping used by the CLI: 2 validation/precondition, 3 budget,
# 4 out-of-class or unsupported structure.
_EXIT_BUDGET = {"BUDGET_EXHAUSTED"}
_EXIT_CLASS = {
    "COMPOSITION_OUT_OF_CLASS",
    "OUT_OF_CLASS",
    "UNSUPPORTED_APERIODIC",
    "INCOMMENSURABLE_PERIODS",
    "INFINITE_SUPPORT",
}


def exit_code_for(err: ErgoError) -> int:
    if err.code in _EXIT_BUDGET:
        return 3
    if err.code in _EXIT_CLASS:
        return 4
    return 2
