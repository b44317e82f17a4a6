"""Exception hierarchy shared by all codemix modules."""


class CodeMixError(Exception):
    """Base class for every error raised by this package."""


class ConllParseError(CodeMixError, ValueError):
    """A CoNLL-U line could not be parsed."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class TreeStructureError(CodeMixError, ValueError):
    """A sentence does not encode a single-rooted dependency tree."""

    def __init__(self, sent_id, violations):
        self.sent_id = sent_id
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations)
        super().__init__(f"sentence {sent_id!r}: {detail}")


class AlignmentDataError(CodeMixError, ValueError):
    """Alignment input is malformed or inconsistent with the treebank."""


class ResourceFormatError(CodeMixError, ValueError):
    """An embedding or cluster file is malformed."""


class ConfigError(CodeMixError, ValueError):
    """A hyper-parameter is outside its legal range."""


class ContractViolation(CodeMixError, RuntimeError):
    """A precondition of an operation was not met by the caller."""


class ModelFormatError(CodeMixError, ValueError):
    """A serialized parser model is corrupt or has an unsupported version."""
