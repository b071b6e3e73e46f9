from explpipe.core.errors import (
    CorpusError,
    DuplicateIdError,
    InvariantError,
    ParseError,
    SchemaVersionError,
)
from explpipe.core.types import (
    NLI_LABELS,
    AggregatedLabel,
    ExplanationCandidate,
    Judgment,
    PromptExample,
    Split,
    Task,
    TaskInstance,
)

__all__ = [
    "AggregatedLabel",
    "CorpusError",
    "DuplicateIdError",
    "ExplanationCandidate",
    "InvariantError",
    "Judgment",
    "NLI_LABELS",
    "ParseError",
    "PromptExample",
    "SchemaVersionError",
    "Split",
    "Task",
    "TaskInstance",
]
