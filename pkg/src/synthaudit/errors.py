"""Exception types shared across the toolkit.

Every failure mode that callers are expected to branch on gets its own
class so tests and the CLI can match on type rather than message text.
"""


class AuditError(Exception):
    """Base class for all toolkit errors."""


# array file I/O
class MagicMismatch(AuditError):
    """File does not start with a valid array-file magic/header."""


class UnsupportedDtype(AuditError):
    """Array file declares an element type the toolkit does not accept."""


class UnsupportedOrder(AuditError):
    """Array file payload is not row-major."""


class TruncatedPayload(AuditError):
    """Payload byte count disagrees with the declared shape."""


class IoFailure(AuditError):
    """Underlying filesystem read or write failed."""


# manifests and datasets
class UnknownLabel(AuditError):
    pass


class UnknownOrigin(AuditError):
    pass


class DuplicateId(AuditError):
    pass


class RowCountMismatch(AuditError):
    pass


class InsufficientSamples(AuditError):
    pass


# embedding
class SyntheticContamination(AuditError):
    """Synthetic samples were passed to a fit that must see real data only."""


class DimTooLarge(AuditError):
    pass


class DegenerateData(AuditError):
    pass


class ShapeMismatch(AuditError):
    pass


# attacks
class EmptySynthetic(AuditError):
    pass


class MissingEmbeddingModel(AuditError):
    pass


class CutoffTooLarge(AuditError):
    pass


class EmptyReference(AuditError):
    pass


class MissingOrigin(AuditError):
    pass


# statistics
class SingleClass(AuditError):
    pass


class EmptyInput(AuditError):
    pass


class OutOfDomain(AuditError):
    pass


# conditioning and generation
class IndexOutOfRange(AuditError):
    pass


class StepOutOfRange(AuditError):
    pass


class DegenerateMorph(AuditError):
    pass


class DimensionMismatch(AuditError):
    pass


# classifier training
class DivergenceDetected(AuditError):
    """Training loss became non-finite."""
