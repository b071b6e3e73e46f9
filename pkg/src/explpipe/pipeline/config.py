"""Run configuration: TOML file plus CLI/environment overrides.

Secrets never live in the config file; the endpoint section names the
environment variable holding the auth token.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    """The run configuration is missing, unparseable, or inconsistent."""


@dataclass(frozen=True)
class DatasetConfig:
    instances: str = ""
    prompt_pool: str = ""
    format: str = "jsonl"


@dataclass(frozen=True)
class PromptSection:
    template: str = "mcqa_style"
    k_choices: tuple[int, ...] = (8, 16, 24)
    token_budget: int = 2049
    completion_reserve: int = 64
    shuffle_choices: bool = True
    label_balance: bool = False


@dataclass(frozen=True)
class GenerationSection:
    n_sampled: int = 4
    temperature: float = 0.9
    max_tokens: int = 64
    parallel_requests: int = 1  # bounded worker pool width
    min_request_interval: float = 0.0  # shared rate limit, seconds per request


@dataclass(frozen=True)
class EndpointSection:
    kind: str = "mock-planted"  # "http" | "mock-planted"
    url: str = ""
    model: str = ""
    token_env: str = "EXPLPIPE_COMPLETIONS_TOKEN"
    max_retries: int = 4
    backoff_seconds: float = 0.5


@dataclass(frozen=True)
class AnnotationSection:
    raters_per_item: int = 3
    batch_size: int = 5
    synthetic_marker: str = "crucially"
    synthetic_noise_annotator: bool = True
    time_floor_ms: int = 5000
    alpha_delta: float = 0.05


@dataclass(frozen=True)
class FilterSection:
    backend: str = "builtin"  # "nll" | "builtin" | "external:<url>"
    mode: str = "full"  # "full" | "explanation_only"
    scheme: str = "with_agreement"
    dims: int = 2**18
    max_epochs: int = 200
    patience: int = 10
    audit_inputs: bool = False  # log formatted scorer inputs to JSON Lines


@dataclass(frozen=True)
class EvalSection:
    threshold: str = "3of3"
    n_random_trials: int = 5


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "run"
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    prompt: PromptSection = field(default_factory=PromptSection)
    generation: GenerationSection = field(default_factory=GenerationSection)
    endpoint: EndpointSection = field(default_factory=EndpointSection)
    annotation: AnnotationSection = field(default_factory=AnnotationSection)
    filter: FilterSection = field(default_factory=FilterSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def validate(self) -> None:
        if self.filter.mode not in ("full", "explanation_only"):
            raise ConfigError(f"unknown filter mode {self.filter.mode!r}")
        if self.filter.scheme not in ("with_agreement", "without_agreement"):
            raise ConfigError(f"unknown label scheme {self.filter.scheme!r}")
        if self.eval.threshold not in ("3of3", "2of3"):
            raise ConfigError(f"unknown threshold {self.eval.threshold!r}")
        backend = self.filter.backend
        if backend not in ("nll", "builtin") and not backend.startswith("external:"):
            raise ConfigError(f"unknown backend {backend!r}")
        if self.endpoint.kind not in ("http", "mock-planted"):
            raise ConfigError(f"unknown endpoint kind {self.endpoint.kind!r}")
        if self.endpoint.kind == "http" and not self.endpoint.url:
            raise ConfigError("endpoint.kind = 'http' requires endpoint.url")


def _section(cls, raw: dict, name: str):
    section = raw.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f for f in cls.__dataclass_fields__}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    if "k_choices" in section:
        section = dict(section)
        section["k_choices"] = tuple(section["k_choices"])
    return cls(**section)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    try:
        cfg = RunConfig(
            experiment=raw.get("experiment", path.stem),
            seed=raw.get("seed", 0),
            dataset=_section(DatasetConfig, raw, "dataset"),
            prompt=_section(PromptSection, raw, "prompt"),
            generation=_section(GenerationSection, raw, "generation"),
            endpoint=_section(EndpointSection, raw, "endpoint"),
            annotation=_section(AnnotationSection, raw, "annotation"),
            filter=_section(FilterSection, raw, "filter"),
            eval=_section(EvalSection, raw, "eval"),
        )
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e
    cfg.validate()
    return cfg


def apply_overrides(
    cfg: RunConfig,
    seed: Optional[int] = None,
    backend: Optional[str] = None,
    threshold: Optional[str] = None,
    mode: Optional[str] = None,
) -> RunConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if backend is not None:
        cfg = replace(cfg, filter=replace(cfg.filter, backend=backend))
    if threshold is not None:
        cfg = replace(cfg, eval=replace(cfg.eval, threshold=threshold))
    if mode is not None:
        cfg = replace(cfg, filter=replace(cfg.filter, mode=mode.replace("-", "_")))
    cfg.validate()
    return cfg
