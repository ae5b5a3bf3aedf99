"""Exception hierarchy for the risk analysis engine.

Three families matter operationally: validation errors (bad inputs,
rejected before any analysis runs), analysis errors (the data cannot
support the requested fit), and storage errors (provenance store
problems). The CLI and HTTP service map these families to exit codes
and status codes respectively.
"""

from __future__ import annotations


class RiskdError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else ""


class ValidationError(RiskdError):
    code = "validation-error"


class AnalysisError(RiskdError):
    code = "analysis-error"


class StorageError(RiskdError):
    code = "storage-error"


# --- validation ------------------------------------------------------------

class MalformedFile(ValidationError):
    code = "malformed-file"


class UnknownVariable(ValidationError):
    code = "unknown-variable"


class InvalidCode(ValidationError):
    code = "invalid-code"


class MissingWeights(ValidationError):
    code = "missing-weights"


class InvalidSpec(ValidationError):
    code = "invalid-spec"


class TypeMismatch(ValidationError):
    code = "type-mismatch"


class MalformedCartridge(ValidationError):
    code = "malformed-cartridge"


class SchemaViolation(ValidationError):
    code = "schema-violation"


class UnknownAxiom(ValidationError):
    code = "unknown-axiom"


class FactorControlCollision(ValidationError):
    code = "factor-control-collision"


class MissingCreatinine(ValidationError):
    code = "missing-creatinine"


class InvalidP(ValidationError):
    code = "invalid-p"


class IndexOutOfRange(ValidationError):
    code = "index-out-of-range"


class DimensionMismatch(ValidationError):
    code = "dimension-mismatch"


class EmptyBatch(ValidationError):
    code = "empty-batch"


class NonBinaryLabel(ValidationError):
    code = "non-binary-label"


# --- analysis --------------------------------------------------------------

class EmptyCohort(AnalysisError):
    code = "empty-cohort"


class DegenerateVariable(AnalysisError):
    code = "degenerate-variable"


class InsufficientData(AnalysisError):
    code = "insufficient-data"


class AllOneClass(AnalysisError):
    code = "all-one-class"


class Separation(AnalysisError):
    code = "separation"


class Singular(AnalysisError):
    code = "singular"


class NotConverged(AnalysisError):
    code = "not-converged"


class AllFactorsSkipped(AnalysisError):
    code = "all-factors-skipped"


class DivergedLoss(AnalysisError):
    code = "diverged-loss"


# --- storage ---------------------------------------------------------------

class DanglingRef(StorageError):
    code = "dangling-ref"


class StorageFailure(StorageError):
    code = "storage-failure"


class NotFound(StorageError):
    code = "not-found"
