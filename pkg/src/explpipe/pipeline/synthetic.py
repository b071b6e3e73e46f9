"""Desk-scale substitutes for the expensive parts of the pipeline: a
synthetic corpus, a deterministic completion endpoint that plants an
acceptability marker in a known subset of candidates, and rule-driven
synthetic annotators who work through the real study store.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from explpipe.core.types import PromptExample, Split, Task, TaskInstance
from explpipe.generation.client import Completion, CompletionRequest
from explpipe.annotation.studies import Study, StudyStore

_TOPICS = (
    "gardens", "bridges", "lanterns", "rivers", "markets", "orchards",
    "workshops", "harbors", "libraries", "meadows", "kitchens", "trails",
)
_VERBS = ("repair", "organize", "water", "measure", "clean", "paint", "sort", "label")
_FILLERS = (
    "this restates the question with the answer filled in",
    "the chosen option is the one people usually pick",
    "the answer follows from common everyday experience",
    "the other possibilities do not fit the situation",
    "such situations almost always end this way",
)


def _h(*parts: str) -> int:
    return int.from_bytes(
        hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()[:8], "big"
    )


class TickingClock:
    """Deterministic clock for reproducible synthetic annotation: starts at a
    fixed epoch and advances one second per call, so re-running the stage
    yields byte-identical judgment files."""

    def __init__(self, start: float = 1_700_000_000.0):
        self.now = start

    def __call__(self) -> float:
        self.now += 1.0
        return self.now


def build_synthetic_corpus(
    n_train: int = 120,
    n_dev: int = 20,
    n_test: int = 60,
    n_pool: int = 30,
    seed: int = 0,
) -> tuple[list[TaskInstance], list[PromptExample]]:
    """Small MCQA corpus plus a pool of explained examples."""
    rng = random.Random(f"{seed}:corpus")
    instances = []
    counts = [(Split.TRAIN, n_train), (Split.DEV, n_dev), (Split.TEST, n_test)]
    serial = 0
    for split, n in counts:
        for _ in range(n):
            topic = rng.choice(_TOPICS)
            verb = rng.choice(_VERBS)
            options = rng.sample(_TOPICS, 4)
            if topic not in options:
                options[0] = topic
            rng.shuffle(options)
            instances.append(
                TaskInstance(
                    id=f"syn{serial:04d}",
                    task=Task.MCQA,
                    gold_label=topic,
                    split=split,
                    question=f"Which place would someone {verb} on day {serial}?",
                    choices=tuple(options),
                )
            )
            serial += 1
    pool = []
    for i in range(n_pool):
        topic = rng.choice(_TOPICS)
        verb = rng.choice(_VERBS)
        options = rng.sample(_TOPICS, 4)
        if topic not in options:
            options[0] = topic
        inst = TaskInstance(
            id=f"pool{i:03d}",
            task=Task.MCQA,
            gold_label=topic,
            split=Split.TRAIN,
            question=f"Which place would someone {verb} in example {i}?",
            choices=tuple(options),
        )
        pool.append(
            PromptExample(
                instance=inst,
                explanation=f"People {verb} {topic} regularly, so {topic} is the natural fit.",
            )
        )
    return instances, pool


@dataclass
class PlantedMockClient:
    """Deterministic endpoint. Explanation completions for a known subset of
    (instance, decode) slots contain ``marker``; every instance gets at least
    one marked sample, so a filter that learns the planted rule can recover a
    marked candidate per instance. Label-mode prompts (no trailing "why?")
    are answered with one of the listed answer choices."""

    marker: str = "crucially"
    seed: int = 0
    cache_namespace: str = "mock-planted"
    calls: int = 0

    def _slot(self, seed_tag: str) -> tuple[str, int]:
        instance_id, _, tag = seed_tag.rpartition(":")
        if tag == "greedy":
            return instance_id, 0
        if tag.startswith("sample"):
            return instance_id, int(tag[len("sample") :])
        return instance_id, -1  # label prediction

    def _marked(self, instance_id: str, slot: int) -> bool:
        guaranteed = _h(str(self.seed), instance_id, "guarantee") % 4 + 1
        if slot == guaranteed:
            return True
        if slot == 0:
            return _h(str(self.seed), instance_id, "greedy") % 3 == 0
        return _h(str(self.seed), instance_id, f"s{slot}") % 4 == 0

    def complete(self, request: CompletionRequest) -> Completion:
        self.calls += 1
        instance_id, slot = self._slot(request.seed_tag)
        if not request.prompt_text.endswith("why?"):
            return self._complete_label(request)
        filler = _FILLERS[_h(str(self.seed), instance_id, str(slot), "filler") % len(_FILLERS)]
        text = f" {filler}"
        if self._marked(instance_id, slot):
            text += f" {self.marker} so"
        tokens = tuple(text.split())
        logprobs = []
        for t in tokens:
            noise = (_h(str(self.seed), request.seed_tag, t) % 500) / 1000.0
            logprobs.append(-(0.1 + noise) - (0.0 if slot == 0 else 0.8))
        return Completion(text=text, token_logprobs=tuple(logprobs), tokens=tokens)

    def _complete_label(self, request: CompletionRequest) -> Completion:
        last_line = request.prompt_text.rsplit("\n", 1)[-1]
        if last_line == "true, false, or neither?":
            words = ["true", "false", "neither"]
        else:
            head = last_line[:-1]  # drop "?"
            first, _, last = head.rpartition(", or ")
            words = [w.strip() for w in first.split(",") if w.strip()] + [last]
        pick = words[_h(str(self.seed), request.seed_tag) % len(words)]
        return Completion(text=f" {pick}", token_logprobs=(-0.5,), tokens=(pick,))


@dataclass(frozen=True)
class SyntheticAnnotator:
    """Accepts exactly the explanations matching the planted rule, except on
    a deterministic noise subset (dissent rate about 1 in ``noise_one_in``)."""

    annotator_id: str
    marker: str
    noise_one_in: int = 0  # 0 = perfectly rule-following
    seed: int = 0
    elapsed_ms: int = 18000

    def accept(self, item_id: str, explanation: str) -> bool:
        verdict = self.marker in explanation
        if self.noise_one_in and _h(str(self.seed), self.annotator_id, item_id) % self.noise_one_in == 0:
            return not verdict
        return verdict


def run_synthetic_annotation(
    store: StudyStore,
    study: Study,
    annotators: Sequence[SyntheticAnnotator],
) -> int:
    """Drive annotators through the real claim/submit machinery until the
    study closes out. Returns the number of judgments recorded."""
    recorded = 0
    for annotator in annotators:
        while True:
            page = store.claim_next(study.study_id, annotator.annotator_id)
            if page is None:
                break
            responses = []
            for item_id in page.item_ids:
                text = study.items[item_id].content.get("explanation", "")
                responses.append((item_id, {"accept": annotator.accept(item_id, text)}))
            store.submit_page(
                study.study_id,
                page.page_id,
                annotator.annotator_id,
                responses,
                annotator.elapsed_ms,
            )
            recorded += len(responses)
    return recorded


def default_annotators(
    marker: str, seed: int, with_noise: bool = True
) -> list[SyntheticAnnotator]:
    return [
        SyntheticAnnotator("syn-ann-1", marker, 0, seed),
        SyntheticAnnotator("syn-ann-2", marker, 0, seed),
        SyntheticAnnotator("syn-ann-3", marker, 10 if with_noise else 0, seed),
    ]
