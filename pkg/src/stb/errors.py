"""Exception types shared across the package."""


class StbError(Exception):
    """Base class for all package errors."""


class CorpusError(StbError):
    """Malformed conversation data or a violated corpus invariant."""

    def __init__(self, message: str, line: int | None = None, conversation_id: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if conversation_id is not None:
            loc.append(f"conversation {conversation_id!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.conversation_id = conversation_id


class TransportError(StbError):
    """A bot endpoint could not be reached or returned garbage."""


class SamplingError(StbError):
    """Conversation sampling finished with fewer successes than requested."""

    def __init__(self, message: str, failures: list[str] | None = None):
        super().__init__(message)
        self.failures = failures or []


class PlanError(StbError):
    """Batch assembly or plan constraints cannot be satisfied."""


class AnnotationRejected(StbError):
    """An annotation record failed validation against the plan."""

    def __init__(self, reason: str, record_key: tuple[str, str] | None = None):
        super().__init__(reason)
        self.reason = reason
        self.record_key = record_key


class UndefinedRateError(StbError):
    """A rate has an empty denominator (e.g. all-ties tally)."""


class NonConvergenceError(StbError):
    """An iterative fit hit its iteration cap before converging."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class UnidentifiableCovariateError(StbError):
    """A regression covariate is constant or separates the outcomes."""

    def __init__(self, covariate: str, detail: str = "constant across observations"):
        super().__init__(f"covariate {covariate!r} is unidentifiable: {detail}")
        self.covariate = covariate
