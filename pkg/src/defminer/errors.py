"""Exception types and process exit codes."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENDPOINT = 3


class DefminerError(Exception):
    """Base class for errors raised by this package."""


class DataError(DefminerError):
    """Malformed input or a violated data contract."""


class EndpointError(DefminerError):
    """External classifier endpoint failed."""


class PipelineStageError(DefminerError):
    """A pipeline stage aborted; partial artifacts are retained on disk."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
