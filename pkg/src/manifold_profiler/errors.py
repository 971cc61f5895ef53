"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to process
exit status without a lookup table: 2 for usage/validation problems, 3 for
bad data (non-finite values, duplicate points, malformed files), 4 for
numerical failures of the estimators.
"""


class ProfilerError(Exception):
    exit_code = 1


class ValidationError(ProfilerError):
    exit_code = 2


class DataError(ProfilerError):
    exit_code = 3


class NumericalError(ProfilerError):
    exit_code = 4


# tensor_io
class FormatError(DataError):
    pass


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class NonFiniteValue(DataError):
    def __init__(self, row, col, where=""):
        self.row, self.col = row, col
        super().__init__(f"non-finite value at row {row}, col {col}{where}")


class IoFailure(DataError):
    pass


class RaggedRows(DataError):
    pass


class NonNumericCell(DataError):
    pass


class SchemaError(ValidationError):
    def __init__(self, field, reason):
        self.field, self.reason = field, reason
        super().__init__(f"{field}: {reason}")


class MissingLayerFile(ValidationError):
    pass


class InconsistentN(ValidationError):
    pass


# neighbors
class DuplicatePoints(DataError):
    def __init__(self, pairs):
        self.pairs = pairs
        shown = ", ".join(f"({i}, {j})" for i, j in pairs[:10])
        more = "" if len(pairs) <= 10 else f" ... ({len(pairs)} pairs)"
        super().__init__(f"points at distance 0: {shown}{more}")


class KTooLarge(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


# gride
class OrderTooSmall(ValidationError):
    pass


class DegenerateSample(DataError):
    pass


class NonPositiveD(ValidationError):
    pass


class EmptySample(DataError):
    pass


class NoInteriorMaximum(NumericalError):
    pass


class WrongScale(ValidationError):
    pass


class ScanTooShort(ValidationError):
    pass


# imbalance / cka
class MismatchedN(ValidationError):
    pass


class MTooLarge(ValidationError):
    pass


# profile analysis
class TooShort(ValidationError):
    pass


class NoInflection(DataError):
    pass


class LengthMismatch(ValidationError):
    pass


class DegenerateVariance(DataError):
    pass


class MissingSurprisal(ValidationError):
    pass


# synth
class InvalidSpec(ValidationError):
    pass


class DimensionTooSmall(ValidationError):
    pass
