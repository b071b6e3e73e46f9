from explpipe.generation.cache import CachingClient, CompletionCache
from explpipe.generation.client import (
    Completion,
    CompletionClient,
    CompletionRequest,
    EndpointError,
    HTTPCompletionClient,
    MockCompletionClient,
    RetryingClient,
)
from explpipe.generation.runs import (
    GenerationConfig,
    GenerationRun,
    LabelPrediction,
    generate_candidates,
    label_prediction_accuracy,
    parse_label_completion,
    predict_label,
    sample_beats_greedy_fraction,
    trim_completion,
)

__all__ = [
    "CachingClient",
    "Completion",
    "CompletionCache",
    "CompletionClient",
    "CompletionRequest",
    "EndpointError",
    "GenerationConfig",
    "GenerationRun",
    "HTTPCompletionClient",
    "LabelPrediction",
    "MockCompletionClient",
    "RetryingClient",
    "generate_candidates",
    "label_prediction_accuracy",
    "parse_label_completion",
    "predict_label",
    "sample_beats_greedy_fraction",
    "trim_completion",
]
