"""Domain types shared by every pipeline stage.

All types are immutable values: safe to share across threads, compared
field-for-field, and round-tripped through JSON Lines without loss.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional

from explpipe.core.errors import InvariantError


class Task(str, Enum):
    MCQA = "mcqa"
    NLI = "nli"


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"
    TEST2 = "test2"


NLI_LABELS = ("entailment", "contradiction", "neutral")

LOGPROB_SUM_TOLERANCE = 1e-9


def content_id(*parts: str) -> str:
    """Deterministic fallback id: short hash of the record's content."""
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()
    return h[:16]


@dataclass(frozen=True)
class TaskInstance:
    """One classification problem: a multiple-choice question or an NLI pair."""

    id: str
    task: Task
    gold_label: str
    split: Split
    question: Optional[str] = None
    choices: tuple[str, ...] = ()
    premise: Optional[str] = None
    hypothesis: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise InvariantError("<missing>", "instance id must be non-empty")
        if self.task is Task.MCQA:
            if not self.question:
                raise InvariantError(self.id, "MCQA instance requires a question")
            if len(self.choices) < 2:
                raise InvariantError(self.id, "MCQA instance requires >= 2 choices")
            if self.gold_label not in self.choices:
                raise InvariantError(
                    self.id, f"gold label {self.gold_label!r} not among choices"
                )
        elif self.task is Task.NLI:
            if self.premise is None or self.hypothesis is None:
                raise InvariantError(self.id, "NLI instance requires premise and hypothesis")
            if self.gold_label not in NLI_LABELS:
                raise InvariantError(
                    self.id,
                    f"gold label {self.gold_label!r} not in {NLI_LABELS}",
                )
        else:  # pragma: no cover - enum is closed
            raise InvariantError(self.id, f"unknown task {self.task}")

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "id": self.id,
            "task": self.task.value,
            "gold_label": self.gold_label,
            "split": self.split.value,
        }
        if self.task is Task.MCQA:
            rec["question"] = self.question
            rec["choices"] = list(self.choices)
        else:
            rec["premise"] = self.premise
            rec["hypothesis"] = self.hypothesis
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "TaskInstance":
        return cls(
            id=rec["id"],
            task=Task(rec["task"]),
            gold_label=rec["gold_label"],
            split=Split(rec["split"]),
            question=rec.get("question"),
            choices=tuple(rec.get("choices", ())),
            premise=rec.get("premise"),
            hypothesis=rec.get("hypothesis"),
        )


@dataclass(frozen=True)
class PromptExample:
    """A pool element: an instance paired with a human-written explanation."""

    instance: TaskInstance
    explanation: str

    def __post_init__(self):
        if not self.explanation.strip():
            raise InvariantError(self.instance.id, "prompt example explanation is empty")

    def to_record(self) -> dict[str, Any]:
        return {"instance": self.instance.to_record(), "explanation": self.explanation}

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "PromptExample":
        return cls(
            instance=TaskInstance.from_record(rec["instance"]),
            explanation=rec["explanation"],
        )


@dataclass(frozen=True)
class ExplanationCandidate:
    """One generated explanation, with its decode mode and token log-probabilities.

    An empty or whitespace-only completion is kept (never silently dropped)
    but must carry ``degenerate=True``; the non-empty text invariant applies
    to all other candidates.
    """

    candidate_id: str
    instance_id: str
    text: str
    decode: str  # "greedy" | "sampled"
    sample_index: Optional[int]  # 1..k for sampled, None for greedy
    token_logprobs: tuple[float, ...]
    total_logprob: float
    prompt_fingerprint: str
    degenerate: bool = False

    def __post_init__(self):
        if self.decode not in ("greedy", "sampled"):
            raise InvariantError(self.candidate_id, f"unknown decode {self.decode!r}")
        if self.decode == "greedy" and self.sample_index is not None:
            raise InvariantError(self.candidate_id, "greedy candidate has a sample index")
        if self.decode == "sampled" and (self.sample_index is None or self.sample_index < 1):
            raise InvariantError(self.candidate_id, "sampled candidate needs sample_index >= 1")
        if not self.text.strip() and not self.degenerate:
            raise InvariantError(self.candidate_id, "candidate text is empty (not flagged degenerate)")
        if any(lp > 0.0 for lp in self.token_logprobs):
            raise InvariantError(self.candidate_id, "token logprob > 0")
        if not math.isclose(
            self.total_logprob, sum(self.token_logprobs), abs_tol=LOGPROB_SUM_TOLERANCE
        ):
            raise InvariantError(
                self.candidate_id,
                "total_logprob does not equal the sum of token_logprobs",
            )

    def to_record(self) -> dict[str, Any]:
        return {
            "candidate_id": self.candidate_id,
            "instance_id": self.instance_id,
            "text": self.text,
            "decode": self.decode,
            "sample_index": self.sample_index,
            "token_logprobs": list(self.token_logprobs),
            "total_logprob": self.total_logprob,
            "prompt_fingerprint": self.prompt_fingerprint,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "ExplanationCandidate":
        return cls(
            candidate_id=rec["candidate_id"],
            instance_id=rec["instance_id"],
            text=rec["text"],
            decode=rec["decode"],
            sample_index=rec.get("sample_index"),
            token_logprobs=tuple(rec["token_logprobs"]),
            total_logprob=rec["total_logprob"],
            prompt_fingerprint=rec["prompt_fingerprint"],
            degenerate=rec.get("degenerate", False),
        )


JUDGMENT_KINDS = ("acceptability", "head_to_head", "absolute")


@dataclass(frozen=True)
class Judgment:
    """A single annotator response to one subject (candidate or item pair).

    (annotator_id, subject_id, kind) is unique within a study: one response
    per annotator per item. ``excluded`` marks responses removed by quality
    control; they stay on disk but never feed aggregation.
    """

    judgment_id: str
    annotator_id: str
    subject_id: str
    kind: str
    payload: Mapping[str, Any]
    elapsed_ms: int
    created_at: str
    study_id: str = ""
    excluded: bool = False

    def __post_init__(self):
        if self.kind not in JUDGMENT_KINDS:
            raise InvariantError(self.judgment_id, f"unknown judgment kind {self.kind!r}")
        if self.elapsed_ms < 0:
            raise InvariantError(self.judgment_id, "elapsed_ms must be >= 0")

    def key(self) -> tuple[str, str, str]:
        return (self.annotator_id, self.subject_id, self.kind)

    def to_record(self) -> dict[str, Any]:
        return {
            "judgment_id": self.judgment_id,
            "annotator_id": self.annotator_id,
            "subject_id": self.subject_id,
            "kind": self.kind,
            "payload": dict(self.payload),
            "elapsed_ms": self.elapsed_ms,
            "created_at": self.created_at,
            "study_id": self.study_id,
            "excluded": self.excluded,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "Judgment":
        return cls(
            judgment_id=rec["judgment_id"],
            annotator_id=rec["annotator_id"],
            subject_id=rec["subject_id"],
            kind=rec["kind"],
            payload=rec["payload"],
            elapsed_ms=rec["elapsed_ms"],
            created_at=rec["created_at"],
            study_id=rec.get("study_id", ""),
            excluded=rec.get("excluded", False),
        )


@dataclass(frozen=True)
class AggregatedLabel:
    """Consensus over the binary acceptability responses for one candidate."""

    candidate_id: str
    n_raters: int
    n_accept: int
    label_3of3: bool = field(default=False)
    label_2of3: bool = field(default=False)

    def __post_init__(self):
        if not (0 <= self.n_accept <= self.n_raters):
            raise InvariantError(self.candidate_id, "n_accept outside [0, n_raters]")
        if self.label_3of3 != (self.n_accept >= 3):
            raise InvariantError(self.candidate_id, "label_3of3 inconsistent with n_accept")
        if self.label_2of3 != (self.n_accept >= 2):
            raise InvariantError(self.candidate_id, "label_2of3 inconsistent with n_accept")

    @classmethod
    def from_counts(cls, candidate_id: str, n_accept: int, n_raters: int = 3) -> "AggregatedLabel":
        return cls(
            candidate_id=candidate_id,
            n_raters=n_raters,
            n_accept=n_accept,
            label_3of3=n_accept >= 3,
            label_2of3=n_accept >= 2,
        )

    def positive(self, threshold: str) -> bool:
        if threshold == "3of3":
            return self.label_3of3
        if threshold == "2of3":
            return self.label_2of3
        raise ValueError(f"unknown threshold {threshold!r}")

    def to_record(self) -> dict[str, Any]:
        return {
            "candidate_id": self.candidate_id,
            "n_raters": self.n_raters,
            "n_accept": self.n_accept,
            "label_3of3": self.label_3of3,
            "label_2of3": self.label_2of3,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "AggregatedLabel":
        return cls(
            candidate_id=rec["candidate_id"],
            n_raters=rec["n_raters"],
            n_accept=rec["n_accept"],
            label_3of3=rec["label_3of3"],
            label_2of3=rec["label_2of3"],
        )
