"""Filter input formatting and training-set construction.

The formatted strings are a byte-stable contract (golden-tested): downstream
scorers, the audit log, and the external-scorer protocol all see exactly
these strings.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from explpipe.core.types import (
    AggregatedLabel,
    ExplanationCandidate,
    Judgment,
    Task,
    TaskInstance,
)

log = logging.getLogger(__name__)

MODES = ("full", "explanation_only")
LABEL_SCHEMES = ("with_agreement", "without_agreement")


@dataclass(frozen=True)
class FilterInput:
    instance_context: str
    gold_label: str
    explanation: str
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.explanation.strip():
            raise ValueError("explanation must be non-empty")
        if self.mode == "full" and (not self.instance_context.strip() or not self.gold_label.strip()):
            raise ValueError("full mode requires instance context and gold label")


def format_filter_input(fi: FilterInput) -> str:
    """Render the exact scorer input string (punctuation is verbatim, so an
    explanation ending in a period yields a double period)."""
    if fi.mode == "explanation_only":
        return f"explanation: {fi.explanation}. Is this explanation good or bad?"
    return (
        f"{fi.instance_context} answer: {fi.gold_label}. "
        f"explanation: {fi.explanation}. Is this explanation good or bad?"
    )


def instance_context(instance: TaskInstance) -> str:
    """Context half of the filter input: the question, or the NLI pair in the
    same question-answering framing the prompts use."""
    if instance.task is Task.MCQA:
        return instance.question
    return f"{instance.premise} question: {instance.hypothesis}"


def filter_input_for_candidate(
    candidate: ExplanationCandidate,
    instance: TaskInstance,
    mode: str,
) -> FilterInput:
    return FilterInput(
        instance_context=instance_context(instance),
        gold_label=instance.gold_label,
        explanation=candidate.text,
        mode=mode,
    )


@dataclass(frozen=True)
class TrainingExample:
    filter_input: FilterInput
    label: bool
    candidate_id: str
    instance_id: str
    split: str


@dataclass(frozen=True)
class TrainingSet:
    examples: tuple[TrainingExample, ...]
    label_scheme: str
    mode: str
    n_excluded: int

    def split_examples(self, split: str) -> list[TrainingExample]:
        return [ex for ex in self.examples if ex.split == split]

    def verify_split_integrity(self) -> None:
        seen: dict[str, str] = {}
        for ex in self.examples:
            if ex.instance_id in seen and seen[ex.instance_id] != ex.split:
                raise ValueError(
                    f"instance {ex.instance_id} has candidates in splits "
                    f"{seen[ex.instance_id]} and {ex.split}"
                )
            seen[ex.instance_id] = ex.split


def build_training_set(
    candidates: Sequence[ExplanationCandidate],
    instances: Sequence[TaskInstance],
    labels: Sequence[AggregatedLabel],
    judgments: Optional[Sequence[Judgment]] = None,
    scheme: str = "with_agreement",
    mode: str = "full",
    rng_seed: int = 0,
) -> TrainingSet:
    """Label every candidate for filter training.

    ``with_agreement`` marks a candidate positive when at least 2 of 3 raters
    accepted it (the threshold that trains best for 3/3 evaluation);
    ``without_agreement`` draws one rater's response, seed-deterministic per
    candidate. Candidates without complete labels (or flagged degenerate) are
    excluded with a warning count. All of an instance's candidates inherit
    its split, so no instance straddles train/dev/test.
    """
    if scheme not in LABEL_SCHEMES:
        raise ValueError(f"scheme must be one of {LABEL_SCHEMES}")
    if scheme == "without_agreement" and judgments is None:
        raise ValueError("without_agreement scheme needs the raw judgments")

    by_instance = {inst.id: inst for inst in instances}
    label_by_candidate = {lab.candidate_id: lab for lab in labels}
    judgments_by_subject: dict[str, list[Judgment]] = {}
    for j in judgments or ():
        if j.kind == "acceptability" and not j.excluded:
            judgments_by_subject.setdefault(j.subject_id, []).append(j)

    examples = []
    n_excluded = 0
    for cand in candidates:
        lab = label_by_candidate.get(cand.candidate_id)
        if lab is None or cand.degenerate:
            n_excluded += 1
            continue
        inst = by_instance[cand.instance_id]
        if scheme == "with_agreement":
            label = lab.n_accept >= 2
        else:
            js = sorted(judgments_by_subject.get(cand.candidate_id, []), key=lambda j: j.annotator_id)
            if not js:
                n_excluded += 1
                continue
            pick = random.Random(f"{rng_seed}:{cand.candidate_id}").randrange(len(js))
            label = bool(js[pick].payload["accept"])
        examples.append(
            TrainingExample(
                filter_input=filter_input_for_candidate(cand, inst, mode),
                label=label,
                candidate_id=cand.candidate_id,
                instance_id=cand.instance_id,
                split=inst.split.value,
            )
        )
    if n_excluded:
        log.warning("excluded %d candidates without complete labels", n_excluded)
    ts = TrainingSet(
        examples=tuple(examples),
        label_scheme=scheme,
        mode=mode,
        n_excluded=n_excluded,
    )
    ts.verify_split_integrity()
    return ts
