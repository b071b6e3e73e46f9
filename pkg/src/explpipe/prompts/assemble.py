"""Few-shot prompt assembly.

Every target instance gets its own freshly sampled prompt: the example count
k is drawn from a per-dataset set, examples are drawn without replacement
(per-label for balanced NLI prompts) and shuffled, and MCQA answer choices
are shuffled independently for each example and for the target. A token
budget (prompt plus a completion reserve) is enforced with a fallback
ladder: resample at the same k, then step down to smaller k values.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from explpipe.core.types import NLI_LABELS, PromptExample, Task, TaskInstance
from explpipe.prompts.templates import (
    PromptTemplate,
    join_blocks,
    load_template,
    render_mcqa_block,
    render_nli_block,
)

DEFAULT_TOKEN_BUDGET = 2049
DEFAULT_COMPLETION_RESERVE = 64
RESAMPLES_PER_K = 5  # extra attempts at one k before stepping down

DEFAULT_K_CHOICES = {
    "mcqa": (8, 16, 24),
    "nli": (12, 18, 24),
    "mcqa_ecqa": (8, 16),  # longer counterfactual explanations need smaller k
}


class PoolExhaustedError(Exception):
    """The example pool cannot satisfy the requested k under balancing."""


class BudgetOverflowError(Exception):
    """No sampled prompt fit the token budget after the fallback ladder."""


def default_token_counter(text: str) -> int:
    """Heuristic token count: ceil(bytes / 4). An exact tokenizer may be
    registered via set_token_counter."""
    return math.ceil(len(text.encode("utf-8")) / 4)


_token_counter: Callable[[str], int] = default_token_counter


def set_token_counter(counter: Callable[[str], int]) -> None:
    global _token_counter
    _token_counter = counter


def reset_token_counter() -> None:
    set_token_counter(default_token_counter)


def estimate_tokens(text: str, counter: Optional[Callable[[str], int]] = None) -> int:
    return (counter or _token_counter)(text)


@dataclass(frozen=True)
class PromptConfig:
    template_id: str
    k_choices: tuple[int, ...]
    token_budget: int = DEFAULT_TOKEN_BUDGET
    completion_reserve: int = DEFAULT_COMPLETION_RESERVE
    shuffle_choices: bool = True  # MCQA answer-choice shuffling
    label_balance: bool = True  # equal per-label example counts (NLI)
    rng_seed: int = 0

    def __post_init__(self):
        if not self.k_choices:
            raise ValueError("k_choices must be non-empty")
        if any(k < 1 for k in self.k_choices):
            raise ValueError("every k must be >= 1")
        object.__setattr__(self, "k_choices", tuple(sorted(set(self.k_choices))))
        template = load_template(self.template_id)
        if template.task is Task.NLI and self.label_balance:
            bad = [k for k in self.k_choices if k % 3 != 0]
            if bad:
                raise ValueError(f"balanced NLI prompts need k divisible by 3, got {bad}")

    @classmethod
    def for_task(cls, task: Task, ecqa_style: bool = False, rng_seed: int = 0, **overrides) -> "PromptConfig":
        if task is Task.NLI:
            return cls(
                template_id="nli_qa_style",
                k_choices=DEFAULT_K_CHOICES["nli"],
                shuffle_choices=False,
                label_balance=True,
                rng_seed=rng_seed,
                **overrides,
            )
        key = "mcqa_ecqa" if ecqa_style else "mcqa"
        return cls(
            template_id="mcqa_style",
            k_choices=DEFAULT_K_CHOICES[key],
            shuffle_choices=True,
            label_balance=False,
            rng_seed=rng_seed,
            **overrides,
        )


@dataclass(frozen=True)
class AssembledPrompt:
    target_instance_id: str
    example_ids: tuple[str, ...]
    rendered_text: str
    estimated_tokens: int
    k_used: int

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.rendered_text.encode("utf-8")).hexdigest()[:16]

    def to_record(self) -> dict:
        return {
            "target_instance_id": self.target_instance_id,
            "example_ids": list(self.example_ids),
            "rendered_text": self.rendered_text,
            "estimated_tokens": self.estimated_tokens,
            "k_used": self.k_used,
            "fingerprint": self.fingerprint,
        }


def derive_rng(seed: int, instance_id: str) -> random.Random:
    """Per-instance random stream, stable across runs and platforms."""
    return random.Random(f"{seed}:{instance_id}")


def _select_examples(
    pool: Sequence[PromptExample],
    k: int,
    balance: bool,
    rng: random.Random,
) -> list[PromptExample]:
    if balance:
        chosen: list[PromptExample] = []
        per_label = k // 3
        for label in NLI_LABELS:
            group = [ex for ex in pool if ex.instance.gold_label == label]
            if len(group) < per_label:
                raise PoolExhaustedError(
                    f"pool has {len(group)} {label!r} examples, need {per_label} for k={k}"
                )
            chosen.extend(rng.sample(group, per_label))
    else:
        chosen = rng.sample(list(pool), k)
    rng.shuffle(chosen)
    return chosen


def _render(
    template: PromptTemplate,
    target: TaskInstance,
    examples: Sequence[PromptExample],
    cfg: PromptConfig,
    rng: random.Random,
    label_mode: bool,
) -> str:
    if template.task is Task.NLI:
        blocks = [
            render_nli_block(ex.instance, ex.explanation, template, label_mode)
            for ex in examples
        ]
        target_block = render_nli_block(target, None, template, label_mode)
    else:
        blocks = []
        for ex in examples:
            order = list(ex.instance.choices)
            if cfg.shuffle_choices:
                rng.shuffle(order)
            blocks.append(
                render_mcqa_block(ex.instance, order, ex.explanation, template, label_mode)
            )
        order = list(target.choices)
        if cfg.shuffle_choices:
            rng.shuffle(order)
        target_block = render_mcqa_block(target, order, None, template, label_mode)
    return join_blocks(template, blocks, target_block)


def assemble_prompt(
    target: TaskInstance,
    pool: Sequence[PromptExample],
    cfg: PromptConfig,
    rng: random.Random,
    label_mode: bool = False,
) -> AssembledPrompt:
    """Sample and render one prompt for ``target``; deterministic given the rng.

    On budget overflow the same k is resampled up to five more times, then
    each smaller k in turn; only after the whole ladder fails does the call
    raise BudgetOverflowError.
    """
    template = load_template(cfg.template_id)
    if any(ex.instance.id == target.id for ex in pool):
        raise ValueError(f"target {target.id} must not appear in the example pool")
    k_max = max(cfg.k_choices)
    if k_max > len(pool):
        raise PoolExhaustedError(f"pool of {len(pool)} cannot supply k={k_max}")
    balance = cfg.label_balance and template.task is Task.NLI

    k_drawn = cfg.k_choices[rng.randrange(len(cfg.k_choices))]
    ladder = [k_drawn] + [k for k in sorted(cfg.k_choices, reverse=True) if k < k_drawn]
    budget = cfg.token_budget - cfg.completion_reserve

    for k in ladder:
        for _attempt in range(1 + RESAMPLES_PER_K):
            examples = _select_examples(pool, k, balance, rng)
            rendered = _render(template, target, examples, cfg, rng, label_mode)
            tokens = estimate_tokens(rendered)
            if tokens <= budget:
                return AssembledPrompt(
                    target_instance_id=target.id,
                    example_ids=tuple(ex.instance.id for ex in examples),
                    rendered_text=rendered,
                    estimated_tokens=tokens,
                    k_used=k,
                )
    raise BudgetOverflowError(
        f"no prompt for {target.id} fit {budget} tokens "
        f"(budget {cfg.token_budget} minus reserve {cfg.completion_reserve})"
    )
