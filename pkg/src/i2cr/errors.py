"""Exception types shared across the package."""


class I2crError(Exception):
    """Base class for all package errors."""


class ConfigError(I2crError):
    """Invalid configuration value, file, or combination of settings."""


class KgError(I2crError):
    """Base class for knowledge-graph snapshot errors."""


class ParseError(KgError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class DuplicateIdError(KgError):
    def __init__(self, entity_id: str, line_number: int):
        self.entity_id = entity_id
        self.line_number = line_number
        super().__init__(f"duplicate entity id {entity_id!r} on line {line_number}")


class SummarizationError(KgError):
    """Summarization aborted; ``completed`` records were already processed."""

    def __init__(self, entity_id: str, completed: int, cause: Exception):
        self.entity_id = entity_id
        self.completed = completed
        self.cause = cause
        super().__init__(
            f"summarizer failed on entity {entity_id!r} after {completed} "
            f"descriptions were summarized: {cause}"
        )


class BackendFailure(I2crError):
    """Base class for model-backend errors."""


class BackendError(BackendFailure):
    def __init__(self, detail: str, status: int | None = None):
        self.status = status
        super().__init__(detail if status is None else f"HTTP {status}: {detail}")


class BackendTimeout(BackendFailure):
    pass


class UnparseableResponse(BackendFailure):
    """Selector output matched neither a candidate name nor the nil marker."""

    def __init__(self, raw_text: str):
        self.raw_text = raw_text
        super().__init__(f"unparseable selector output: {raw_text!r}")


class MockMiss(BackendFailure):
    """Strict mock received a request absent from its transcript."""

    def __init__(self, role: str, fingerprint: str):
        self.role = role
        self.fingerprint = fingerprint
        super().__init__(f"no transcript entry for role={role} fingerprint={fingerprint}")


class ImageDecodeError(BackendFailure):
    pass


class DimensionMismatch(BackendFailure):
    pass


class DegenerateEmbedding(BackendFailure):
    """An embedding with zero norm cannot be cosine-scored."""


class TraceInvalid(I2crError):
    """A link trace violated the event-sequence grammar."""

    def __init__(self, reason: str, index: int | None = None):
        self.index = index
        self.reason = reason
        super().__init__(reason if index is None else f"event {index}: {reason}")


class MissingGoldError(I2crError):
    def __init__(self, sample_index: int, reason: str = "sample has neither gold_id nor out_of_kg flag"):
        self.sample_index = sample_index
        super().__init__(f"sample {sample_index}: {reason}")


class EmptyEvalSetError(I2crError):
    pass


class FailureCapExceeded(I2crError):
    def __init__(self, failures: int, total: int, cap: float):
        self.failures = failures
        self.total = total
        self.cap = cap
        super().__init__(f"{failures}/{total} samples failed, above the cap of {cap:.2f}")
