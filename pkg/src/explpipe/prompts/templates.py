"""Prompt templates and block rendering.

Templates live in versioned JSON files so golden tests can pin byte-exact
output. An NLI pair is rendered as question answering (premise, then
"question: <hypothesis>", then "true, false, or neither?"), which beat the
classification framing in prompt-design exploration; MCQA renders the
question, the comma-joined answer choices, and the gold label. A block
without an explanation is a generation target and ends on the bare "why?";
label-prediction blocks drop the "why?" line entirely so the model completes
the label slot instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional, Sequence

from explpipe.core.types import Task, TaskInstance

TEMPLATE_DIR = Path(__file__).parent / "templates"

NLI_LABEL_WORDS = {"entailment": "true", "contradiction": "false", "neutral": "neither"}
NLI_WORD_TO_LABEL = {w: l for l, w in NLI_LABEL_WORDS.items()}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: int
    preamble: str
    separator: str
    label_words: Mapping[str, str]
    example_block: str
    target_block: str
    label_example_block: str
    label_target_block: str

    @property
    def task(self) -> Task:
        return Task.NLI if self.label_words else Task.MCQA


@lru_cache(maxsize=None)
def load_template(template_id: str) -> PromptTemplate:
    path = TEMPLATE_DIR / f"{template_id}.json"
    if not path.exists():
        known = sorted(p.stem for p in TEMPLATE_DIR.glob("*.json"))
        raise ValueError(f"unknown template {template_id!r}; available: {known}")
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    return PromptTemplate(
        template_id=raw["template_id"],
        version=raw["version"],
        preamble=raw["preamble"],
        separator=raw["separator"],
        label_words=raw.get("label_words", {}),
        example_block=raw["example_block"],
        target_block=raw["target_block"],
        label_example_block=raw["label_example_block"],
        label_target_block=raw["label_target_block"],
    )


def choices_line(choice_order: Sequence[str]) -> str:
    """Comma-join answer choices, ending "or <last>?"."""
    if len(choice_order) < 2:
        raise ValueError("need at least 2 choices")
    return ", ".join(choice_order[:-1]) + ", or " + choice_order[-1] + "?"


def render_nli_block(
    instance: TaskInstance,
    explanation: Optional[str] = None,
    template: Optional[PromptTemplate] = None,
    label_mode: bool = False,
) -> str:
    """One NLI prompt block; ``explanation=None`` renders the target block."""
    template = template or load_template("nli_qa_style")
    if instance.task is not Task.NLI:
        raise ValueError(f"instance {instance.id} is not NLI")
    fields = {
        "premise": instance.premise,
        "hypothesis": instance.hypothesis,
        "label_word": template.label_words[instance.gold_label],
    }
    if label_mode:
        block = template.label_target_block if explanation is None else template.label_example_block
        return block.format(**fields)
    if explanation is None:
        return template.target_block.format(**fields)
    return template.example_block.format(explanation=explanation, **fields)


def render_mcqa_block(
    instance: TaskInstance,
    choice_order: Sequence[str],
    explanation: Optional[str] = None,
    template: Optional[PromptTemplate] = None,
    label_mode: bool = False,
) -> str:
    """One MCQA prompt block with a caller-supplied answer-choice permutation."""
    template = template or load_template("mcqa_style")
    if instance.task is not Task.MCQA:
        raise ValueError(f"instance {instance.id} is not MCQA")
    if sorted(choice_order) != sorted(instance.choices):
        raise ValueError(f"choice_order is not a permutation of {instance.id}'s choices")
    fields = {
        "question": instance.question,
        "choices_line": choices_line(choice_order),
        "gold_label": instance.gold_label,
    }
    if label_mode:
        block = template.label_target_block if explanation is None else template.label_example_block
        return block.format(**fields)
    if explanation is None:
        return template.target_block.format(**fields)
    return template.example_block.format(explanation=explanation, **fields)


def join_blocks(template: PromptTemplate, example_blocks: Sequence[str], target_block: str) -> str:
    lines = [template.preamble]
    for block in example_blocks:
        lines.append(block)
        lines.append(template.separator)
    lines.append(target_block)
    return "\n".join(lines)


def label_vocabulary(instance: TaskInstance) -> dict[str, str]:
    """Completion word -> canonical label, for parsing label predictions."""
    if instance.task is Task.NLI:
        return dict(NLI_WORD_TO_LABEL)
    return {choice: choice for choice in instance.choices}
