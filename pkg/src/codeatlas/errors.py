"""Exception hierarchy shared across the package."""


class CodeAtlasError(Exception):
    """Base class for all package errors."""


class IngestError(CodeAtlasError):
    pass


class RootNotFoundError(IngestError):
    pass


class NoFilesMatchedError(IngestError):
    """Raised when a scan matches zero files; an empty ground truth makes
    the coverage metric undefined, so this is distinct from root-not-found."""


class SelectionError(IngestError):
    """Invalid context selection (unknown manifest path, over-cap manifest)."""


class DotSyntaxError(CodeAtlasError):
    """DOT input outside the supported subset or plainly malformed.

    Carries the 1-based line/column of the offending token.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class GraphValidationError(CodeAtlasError):
    """Structurally parseable graph that violates a model invariant
    (illegal relation for the map kind, duplicate node, self-loop)."""


class OverviewValidationError(CodeAtlasError):
    """Overview JSON missing required fields or violating linkage rules."""

    def __init__(self, message, missing_fields=()):
        self.missing_fields = list(missing_fields)
        super().__init__(message)


class PromptError(CodeAtlasError):
    pass


class GatewayError(CodeAtlasError):
    pass


class ConfigurationError(GatewayError):
    pass


class ContextCapExceededError(GatewayError):
    pass


class AuthenticationError(GatewayError):
    """Provider rejected the credential; never retried."""


class RetriesExhaustedError(GatewayError):
    def __init__(self, message, last_error=None):
        self.last_error = last_error
        super().__init__(message)


class ScriptExhaustedError(GatewayError):
    """A scripted session was asked for more completions than it holds.
    Signals a test-harness bug, not a runtime condition to recover from."""


class RefinementError(CodeAtlasError):
    def __init__(self, message, partial_trace=None):
        self.partial_trace = partial_trace
        super().__init__(message)


class SessionError(CodeAtlasError):
    pass


class UnknownSessionError(SessionError):
    pass


class UnknownNodeError(SessionError):
    pass
