from explpipe.filtering.backends import (
    DEGENERATE_SCORE,
    ExternalScorerClient,
    FilterScore,
    FilterScoreSet,
    MissingLogprobsError,
    ScorerProtocolError,
    score_builtin,
    score_external,
    score_nll,
    select_one,
)
from explpipe.filtering.hashed_linear import (
    HashedLinearModel,
    SingleLabelError,
    TrainerConfig,
    train_model,
)
from explpipe.filtering.inputs import (
    FilterInput,
    TrainingExample,
    TrainingSet,
    build_training_set,
    filter_input_for_candidate,
    format_filter_input,
    instance_context,
)
from explpipe.filtering.scorer_service import KeywordScorer, create_scorer_app
from explpipe.filtering.train import train_builtin

__all__ = [
    "DEGENERATE_SCORE",
    "ExternalScorerClient",
    "FilterInput",
    "FilterScore",
    "FilterScoreSet",
    "HashedLinearModel",
    "KeywordScorer",
    "MissingLogprobsError",
    "ScorerProtocolError",
    "SingleLabelError",
    "TrainerConfig",
    "TrainingExample",
    "TrainingSet",
    "build_training_set",
    "create_scorer_app",
    "filter_input_for_candidate",
    "format_filter_input",
    "instance_context",
    "score_builtin",
    "score_external",
    "score_nll",
    "select_one",
    "train_builtin",
    "train_model",
]
