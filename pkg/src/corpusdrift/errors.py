"""Exception types shared across the toolkit."""


class CorpusDriftError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CorpusDriftError):
    """Invalid or inconsistent pipeline configuration."""


class GitError(CorpusDriftError):
    """A git operation failed (unreachable remote, bad ref, command error)."""


class EmptyHistoryError(GitError):
    """No commit exists on the default branch at or before the cutoff."""


class ContractViolationError(CorpusDriftError):
    """A client or data source broke its declared contract."""


class DuplicateDocIdError(CorpusDriftError):
    """Two corpus documents share the same doc_id."""


class ProviderError(CorpusDriftError):
    """An external provider call failed after bounded retries."""


class JudgeParseError(CorpusDriftError):
    """The judge response does not match the expected schema."""


class MissingPrerequisiteError(CorpusDriftError):
    """A pipeline stage was invoked before the stage it depends on."""

    def __init__(self, message: str, run_first: str | None = None):
        super().__init__(message)
        self.run_first = run_first
