class ContractViolation(ValueError):
    """Inputs that break a function's preconditions (mixed shapes, misaligned ids)."""


class DomainError(ValueError):
    """Numbers outside the domain of a formula (events > group size, bad CI bounds)."""


class IncompleteDataError(DomainError):
    """A finding lacks a field needed for the effect estimate."""


class DegenerateVarianceError(DomainError):
    pass


class EmptyAnalysisError(ValueError):
    """Nothing left to pool."""


class ConfigError(ValueError):
    pass


class TransportError(RuntimeError):
    """The model endpoint could not be reached or kept failing."""

    def __init__(self, message: str, attempts: int = 0, record_id: str | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.record_id = record_id

    def __str__(self) -> str:
        base = super().__str__()
        return f"[{self.record_id}] {base}" if self.record_id else base


class ReplayMiss(TransportError):
    """Replay mode was asked for a prompt it has no recorded response for."""

    def __init__(self, prompt_hash: str, record_id: str | None = None):
        super().__init__(f"no recorded response for prompt {prompt_hash}", 0, record_id)
        self.prompt_hash = prompt_hash
