"""Candidate overgeneration (one greedy + n sampled completions per
instance) and few-shot label prediction.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from explpipe.core.types import ExplanationCandidate, PromptExample, TaskInstance
from explpipe.generation.client import Completion, CompletionClient, CompletionRequest
from explpipe.prompts.assemble import (
    AssembledPrompt,
    PromptConfig,
    assemble_prompt,
    derive_rng,
)
from explpipe.prompts.templates import label_vocabulary, load_template

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationConfig:
    """Decode parameters. The sampling temperature and max length are
    explicit configuration, not asserted defaults: 0.9 and 64 tokens with the
    template separator as a stop sequence."""

    n_sampled: int = 4
    temperature: float = 0.9
    max_tokens: int = 64
    want_logprobs: bool = True

    def __post_init__(self):
        # temperature 0 is reserved for the greedy request of a run
        if self.temperature <= 0:
            raise ValueError("sampling temperature must be > 0 (0 is the greedy decode)")
        if self.n_sampled < 0:
            raise ValueError("n_sampled must be >= 0")


@dataclass(frozen=True)
class GenerationRun:
    run_id: str
    instance_id: str
    n_sampled: int
    candidates: tuple[ExplanationCandidate, ...]
    prompt: AssembledPrompt

    def __post_init__(self):
        if len(self.candidates) != 1 + self.n_sampled:
            raise ValueError(
                f"run {self.run_id}: {len(self.candidates)} candidates, expected {1 + self.n_sampled}"
            )
        if self.candidates[0].decode != "greedy":
            raise ValueError(f"run {self.run_id}: first candidate must be greedy")

    @property
    def greedy(self) -> ExplanationCandidate:
        return self.candidates[0]


def trim_completion(text: str, stop_sequences: Sequence[str]) -> tuple[str, int]:
    """Cut at the first stop sequence; returns (trimmed, cut position)."""
    cut = len(text)
    for stop in stop_sequences:
        pos = text.find(stop)
        if pos != -1:
            cut = min(cut, pos)
    return text[:cut], cut


def _aligned_logprobs(completion: Completion, raw_text: str, cut: int) -> tuple[float, ...]:
    """Keep logprobs for tokens that end before the stop-sequence cut.

    Tokens are located in order within the raw text; when alignment is not
    possible (no token strings supplied) the full list is kept.
    """
    if cut >= len(raw_text) or not completion.tokens:
        return completion.token_logprobs
    kept = 0
    pos = 0
    for token in completion.tokens[: len(completion.token_logprobs)]:
        found = raw_text.find(token, pos)
        if found == -1:
            return completion.token_logprobs  # cannot align; keep everything
        end = found + len(token)
        if end > cut:
            break
        kept += 1
        pos = end
    return completion.token_logprobs[:kept]


def _candidate_from_completion(
    candidate_id: str,
    instance_id: str,
    completion: Completion,
    decode: str,
    sample_index: Optional[int],
    fingerprint: str,
    stop_sequences: Sequence[str],
) -> ExplanationCandidate:
    raw = completion.text.lstrip()
    trimmed, cut = trim_completion(raw, stop_sequences)
    text = trimmed.strip()
    logprobs = _aligned_logprobs(completion, raw, cut)
    degenerate = not text
    if degenerate:
        log.warning("empty completion retained for %s (%s)", instance_id, candidate_id)
        logprobs = ()
    return ExplanationCandidate(
        candidate_id=candidate_id,
        instance_id=instance_id,
        text=text,
        decode=decode,
        sample_index=sample_index,
        token_logprobs=tuple(logprobs),
        total_logprob=sum(logprobs),
        prompt_fingerprint=fingerprint,
        degenerate=degenerate,
    )


def generate_candidates(
    instance: TaskInstance,
    pool: Sequence[PromptExample],
    prompt_cfg: PromptConfig,
    gen_cfg: GenerationConfig,
    client: CompletionClient,
    rng: Optional[random.Random] = None,
) -> GenerationRun:
    """One greedy plus ``n_sampled`` stochastic candidates for ``instance``.

    Completions are trimmed at the template separator and newline; empty
    completions are retained as flagged degenerate candidates rather than
    silently resampled (resampling would bias acceptability statistics).
    """
    rng = rng or derive_rng(prompt_cfg.rng_seed, instance.id)
    template = load_template(prompt_cfg.template_id)
    prompt = assemble_prompt(instance, pool, prompt_cfg, rng)
    stops = (template.separator, "\n")

    def request(temperature: float, seed_tag: str) -> CompletionRequest:
        return CompletionRequest(
            prompt_text=prompt.rendered_text,
            max_tokens=gen_cfg.max_tokens,
            temperature=temperature,
            stop_sequences=stops,
            want_logprobs=gen_cfg.want_logprobs,
            seed_tag=seed_tag,
        )

    candidates = [
        _candidate_from_completion(
            f"{instance.id}#greedy",
            instance.id,
            client.complete(request(0.0, f"{instance.id}:greedy")),
            "greedy",
            None,
            prompt.fingerprint,
            stops,
        )
    ]
    for i in range(1, gen_cfg.n_sampled + 1):
        candidates.append(
            _candidate_from_completion(
                f"{instance.id}#s{i}",
                instance.id,
                client.complete(request(gen_cfg.temperature, f"{instance.id}:sample{i}")),
                "sampled",
                i,
                prompt.fingerprint,
                stops,
            )
        )
    return GenerationRun(
        run_id=f"{instance.id}:{prompt.fingerprint[:8]}",
        instance_id=instance.id,
        n_sampled=gen_cfg.n_sampled,
        candidates=tuple(candidates),
        prompt=prompt,
    )


def sample_beats_greedy_fraction(runs: Sequence[GenerationRun]) -> float:
    """Fraction of runs where some sample out-scores greedy on sequence
    log-likelihood. Greedy usually wins but not always; this statistic is
    recorded rather than asserted."""
    if not runs:
        raise ValueError("no runs")
    beaten = sum(
        any(c.total_logprob > run.greedy.total_logprob for c in run.candidates[1:])
        for run in runs
    )
    return beaten / len(runs)


@dataclass(frozen=True)
class LabelPrediction:
    instance_id: str
    predicted_label: Optional[str]
    raw_completion: str
    parse_ok: bool

    def to_record(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "predicted_label": self.predicted_label,
            "raw_completion": self.raw_completion,
            "parse_ok": self.parse_ok,
        }


def parse_label_completion(completion_text: str, vocabulary: dict[str, str]) -> Optional[str]:
    """Case-insensitive longest match of a label word inside the completion.

    Earliest occurrence wins; on a shared start position the longest
    vocabulary entry wins (so "being employed" beats "employed").
    """
    haystack = completion_text.lower()
    best: Optional[tuple[int, int, str]] = None
    for word, canonical in vocabulary.items():
        pos = haystack.find(word.lower())
        if pos == -1:
            continue
        key = (pos, -len(word))
        if best is None or key < best[:2]:
            best = (pos, -len(word), canonical)
    return best[2] if best else None


def predict_label(
    instance: TaskInstance,
    pool: Sequence[PromptExample],
    prompt_cfg: PromptConfig,
    client: CompletionClient,
    rng: Optional[random.Random] = None,
    max_tokens: int = 8,
) -> LabelPrediction:
    """Few-shot label prediction: the same prompt layout minus the "why?"
    lines and explanations, completed greedily at the label slot."""
    rng = rng or derive_rng(prompt_cfg.rng_seed, f"label:{instance.id}")
    template = load_template(prompt_cfg.template_id)
    prompt = assemble_prompt(instance, pool, prompt_cfg, rng, label_mode=True)
    stops = (template.separator, "\n")
    completion = client.complete(
        CompletionRequest(
            prompt_text=prompt.rendered_text,
            max_tokens=max_tokens,
            temperature=0.0,
            stop_sequences=stops,
            want_logprobs=False,
            seed_tag=f"{instance.id}:label",
        )
    )
    raw = completion.text
    text, _ = trim_completion(raw.lstrip(), stops)
    predicted = parse_label_completion(text.strip(), label_vocabulary(instance))
    if predicted is None:
        log.warning("unparseable label completion for %s: %r", instance.id, raw)
    return LabelPrediction(
        instance_id=instance.id,
        predicted_label=predicted,
        raw_completion=raw,
        parse_ok=predicted is not None,
    )


def label_prediction_accuracy(
    predictions: Sequence[LabelPrediction],
    instances: Sequence[TaskInstance],
) -> float:
    """Percent correct; unparseable completions count as incorrect."""
    gold = {inst.id: inst.gold_label for inst in instances}
    if not predictions:
        raise ValueError("no predictions")
    hits = sum(1 for p in predictions if p.parse_ok and p.predicted_label == gold[p.instance_id])
    return 100.0 * hits / len(predictions)
