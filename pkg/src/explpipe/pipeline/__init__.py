from explpipe.pipeline.config import ConfigError, RunConfig, apply_overrides, load_config
from explpipe.pipeline.manifest import RunManifest, config_hash, file_sha256
from explpipe.pipeline.stages import (
    MissingUpstreamError,
    StageResult,
    ValidationFailure,
    run_pipeline,
)

__all__ = [
    "ConfigError",
    "MissingUpstreamError",
    "RunConfig",
    "RunManifest",
    "StageResult",
    "ValidationFailure",
    "apply_overrides",
    "config_hash",
    "file_sha256",
    "load_config",
    "run_pipeline",
]
