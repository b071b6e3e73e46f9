import random
from pathlib import Path

import pytest

from explpipe.core.types import PromptExample, Split, Task, TaskInstance
from explpipe.prompts.assemble import (
    BudgetOverflowError,
    PoolExhaustedError,
    PromptConfig,
    assemble_prompt,
    default_token_counter,
    derive_rng,
    estimate_tokens,
    reset_token_counter,
    set_token_counter,
)
from explpipe.prompts.templates import (
    choices_line,
    join_blocks,
    label_vocabulary,
    load_template,
    render_mcqa_block,
    render_nli_block,
)

GOLDEN = Path(__file__).parent / "golden"

NLI_LABEL_CYCLE = ("entailment", "contradiction", "neutral")


def nli_instance(i, label, split=Split.TRAIN):
    return TaskInstance(
        id=f"nli{i}",
        task=Task.NLI,
        gold_label=label,
        split=split,
        premise=f"Premise sentence number {i}.",
        hypothesis=f"Hypothesis sentence number {i}.",
    )


def nli_pool(n=115):
    return [
        PromptExample(
            instance=nli_instance(i, NLI_LABEL_CYCLE[i % 3]),
            explanation=f"Because of background fact {i}, the relation holds.",
        )
        for i in range(n)
    ]


def mcqa_instance(i, n_choices=5, split=Split.TRAIN):
    choices = tuple(f"option {i}-{j}" for j in range(n_choices))
    return TaskInstance(
        id=f"mc{i}",
        task=Task.MCQA,
        gold_label=choices[i % n_choices],
        split=split,
        question=f"Question number {i}, which option is right?",
        choices=choices,
    )


def mcqa_pool(n=115):
    return [
        PromptExample(
            instance=mcqa_instance(i),
            explanation=f"Option {i % 5} is correct because of everyday fact {i}.",
        )
        for i in range(n)
    ]


class TestRendering:
    def test_nli_entailment_label_word(self):
        inst = TaskInstance(
            id="e1", task=Task.NLI, gold_label="entailment", split=Split.TRAIN,
            premise="A man plays a guitar on stage.",
            hypothesis="A musician is performing.",
        )
        block = render_nli_block(inst, "Guitars are musical instruments.")
        assert "true, false, or neither? true" in block

    def test_nli_neutral_label_word(self):
        inst = nli_instance(1, "neutral")
        block = render_nli_block(inst, "Could go either way.")
        assert "true, false, or neither? neither" in block

    def test_nli_target_ends_with_bare_why(self):
        inst = nli_instance(2, "contradiction")
        block = render_nli_block(inst)
        assert block.splitlines()[-1] == "why?"

    def test_mcqa_five_choices_or_last(self):
        inst = mcqa_instance(0, n_choices=5)
        order = list(inst.choices)[::-1]
        block = render_mcqa_block(inst, order, "Some explanation.")
        line = block.splitlines()[1]
        assert line.endswith(f"or {order[-1]}?")

    def test_mcqa_two_choice_identity_permutation(self):
        assert choices_line(["a", "b"]) == "a, or b?"

    def test_mcqa_target_final_line_why(self):
        inst = mcqa_instance(3)
        block = render_mcqa_block(inst, list(inst.choices))
        assert block.splitlines()[-1] == "why?"

    def test_mcqa_rejects_non_permutation(self):
        inst = mcqa_instance(1)
        with pytest.raises(ValueError):
            render_mcqa_block(inst, ["x", "y"], "e")

    def _golden_nli_parts(self):
        template = load_template("nli_qa_style")
        ex1 = TaskInstance(
            id="g1", task=Task.NLI, gold_label="entailment", split=Split.TRAIN,
            premise="A man plays a guitar on stage.",
            hypothesis="A musician is performing.",
        )
        ex2 = TaskInstance(
            id="g2", task=Task.NLI, gold_label="contradiction", split=Split.TRAIN,
            premise="Two kids build a sandcastle.",
            hypothesis="The kids are sleeping.",
        )
        target = TaskInstance(
            id="g3", task=Task.NLI, gold_label="neutral", split=Split.TRAIN,
            premise="A woman reads a book on a bench.",
            hypothesis="The woman is outdoors.",
        )
        expl1 = "Playing a guitar on a stage is a performance, and someone playing music is a musician."
        expl2 = "Building a sandcastle is an activity that cannot be done while asleep."
        return template, ex1, ex2, target, expl1, expl2

    def test_nli_golden(self):
        template, ex1, ex2, target, expl1, expl2 = self._golden_nli_parts()
        rendered = join_blocks(
            template,
            [render_nli_block(ex1, expl1), render_nli_block(ex2, expl2)],
            render_nli_block(target),
        )
        assert rendered == (GOLDEN / "nli_prompt.txt").read_text()
        assert rendered.endswith("why?")

    def test_nli_label_mode_golden(self):
        template, ex1, ex2, target, expl1, expl2 = self._golden_nli_parts()
        rendered = join_blocks(
            template,
            [
                render_nli_block(ex1, expl1, label_mode=True),
                render_nli_block(ex2, expl2, label_mode=True),
            ],
            render_nli_block(target, label_mode=True),
        )
        assert rendered == (GOLDEN / "nli_label_prompt.txt").read_text()
        assert rendered.endswith("true, false, or neither?")
        assert "why?" not in rendered

    def _golden_mcqa_parts(self):
        template = load_template("mcqa_style")
        ex1 = TaskInstance(
            id="g1", task=Task.MCQA, gold_label="scissors", split=Split.TRAIN,
            question="What do people use to cut paper?",
            choices=("scissors", "a hammer", "a spoon"),
        )
        ex2 = TaskInstance(
            id="g2", task=Task.MCQA, gold_label="water", split=Split.TRAIN,
            question="Where do fish live?",
            choices=("a nest", "water"),
        )
        target = TaskInstance(
            id="g3", task=Task.MCQA, gold_label="meow", split=Split.TRAIN,
            question="What can a cat do?",
            choices=("bark", "meow", "fly"),
        )
        expl1 = "Scissors have two blades made for cutting sheets of material such as paper."
        expl2 = "Fish breathe through gills, which only work in water."
        return template, ex1, ex2, target, expl1, expl2

    def test_mcqa_golden(self):
        template, ex1, ex2, target, expl1, expl2 = self._golden_mcqa_parts()
        rendered = join_blocks(
            template,
            [
                render_mcqa_block(ex1, list(ex1.choices), expl1),
                render_mcqa_block(ex2, list(ex2.choices), expl2),
            ],
            render_mcqa_block(target, list(target.choices)),
        )
        assert rendered == (GOLDEN / "mcqa_prompt.txt").read_text()
        assert rendered.endswith("why?")

    def test_mcqa_label_mode_golden(self):
        template, ex1, ex2, target, expl1, expl2 = self._golden_mcqa_parts()
        rendered = join_blocks(
            template,
            [
                render_mcqa_block(ex1, list(ex1.choices), expl1, label_mode=True),
                render_mcqa_block(ex2, list(ex2.choices), expl2, label_mode=True),
            ],
            render_mcqa_block(target, list(target.choices), label_mode=True),
        )
        assert rendered == (GOLDEN / "mcqa_label_prompt.txt").read_text()
        assert rendered.endswith("bark, meow, or fly?")

    def test_label_vocabulary(self):
        assert label_vocabulary(nli_instance(0, "neutral")) == {
            "true": "entailment",
            "false": "contradiction",
            "neither": "neutral",
        }
        inst = mcqa_instance(0, 3)
        assert set(label_vocabulary(inst)) == set(inst.choices)


class TestTokenEstimation:
    def teardown_method(self):
        reset_token_counter()

    def test_empty_is_zero(self):
        assert estimate_tokens("") == 0

    def test_400_ascii_chars(self):
        assert estimate_tokens("a" * 400) == 100

    def test_concatenation_monotone(self):
        rng = random.Random(0)
        for _ in range(50):
            t1 = "x" * rng.randint(0, 50)
            t2 = "y" * rng.randint(0, 50)
            whole = estimate_tokens(t1 + t2)
            assert whole >= max(estimate_tokens(t1), estimate_tokens(t2))

    def test_counter_injection(self):
        set_token_counter(lambda text: len(text.split()))
        assert estimate_tokens("three word text") == 3
        reset_token_counter()
        assert estimate_tokens("three word text") == default_token_counter("three word text")


class TestAssembly:
    def test_nli_balance_per_k(self):
        pool = nli_pool(115)
        cfg = PromptConfig.for_task(Task.NLI, rng_seed=3)
        target = nli_instance(900, "neutral", Split.TEST)
        per_label_expected = {12: 4, 18: 6, 24: 8}
        seen_k = set()
        for i in range(60):
            prompt = assemble_prompt(target, pool, cfg, derive_rng(3, f"t{i}"))
            assert prompt.k_used in (12, 18, 24)
            seen_k.add(prompt.k_used)
            by_label = {l: 0 for l in NLI_LABEL_CYCLE}
            pool_by_id = {ex.instance.id: ex for ex in pool}
            for eid in prompt.example_ids:
                by_label[pool_by_id[eid].instance.gold_label] += 1
            assert set(by_label.values()) == {per_label_expected[prompt.k_used]}
        assert seen_k == {12, 18, 24}

    def test_pool_of_exactly_k(self):
        pool = mcqa_pool(8)
        cfg = PromptConfig.for_task(Task.MCQA, rng_seed=1)
        cfg = PromptConfig(
            template_id="mcqa_style", k_choices=(8,), rng_seed=1, label_balance=False
        )
        target = mcqa_instance(500, split=Split.TEST)
        prompt = assemble_prompt(target, pool, cfg, derive_rng(1, target.id))
        assert sorted(prompt.example_ids) == sorted(ex.instance.id for ex in pool)
        assert target.id not in prompt.example_ids

    def test_fixed_seed_byte_identical(self):
        pool = nli_pool(60)
        cfg = PromptConfig.for_task(Task.NLI, rng_seed=7)
        target = nli_instance(901, "entailment", Split.TEST)
        one = assemble_prompt(target, pool, cfg, derive_rng(7, target.id))
        two = assemble_prompt(target, pool, cfg, derive_rng(7, target.id))
        assert one.rendered_text == two.rendered_text
        assert one == two

    def test_target_never_in_pool_examples(self):
        pool = mcqa_pool(40)
        cfg = PromptConfig(template_id="mcqa_style", k_choices=(8, 16), rng_seed=2, label_balance=False)
        for i in range(30):
            target = mcqa_instance(600 + i, split=Split.TEST)
            prompt = assemble_prompt(target, pool, cfg, derive_rng(2, target.id))
            assert target.id not in prompt.example_ids

    def test_target_in_pool_rejected(self):
        pool = mcqa_pool(10)
        cfg = PromptConfig(template_id="mcqa_style", k_choices=(8,), rng_seed=0, label_balance=False)
        with pytest.raises(ValueError):
            assemble_prompt(pool[0].instance, pool, cfg, random.Random(0))

    def test_budget_respected(self):
        pool = nli_pool(60)
        cfg = PromptConfig.for_task(Task.NLI, rng_seed=5)
        target = nli_instance(902, "neutral", Split.TEST)
        prompt = assemble_prompt(target, pool, cfg, derive_rng(5, target.id))
        assert prompt.estimated_tokens + cfg.completion_reserve <= cfg.token_budget

    def test_budget_ladder_steps_down_k(self):
        pool = nli_pool(60)
        # block is ~40 tokens; allow ~14 blocks worth so k=18/24 never fit
        cfg = PromptConfig(
            template_id="nli_qa_style",
            k_choices=(12, 18, 24),
            token_budget=600,
            completion_reserve=40,
            rng_seed=11,
        )
        target = nli_instance(903, "contradiction", Split.TEST)
        for i in range(20):
            prompt = assemble_prompt(target, pool, cfg, derive_rng(11, f"x{i}"))
            assert prompt.k_used == 12

    def test_budget_overflow_after_ladder(self):
        pool = nli_pool(60)
        cfg = PromptConfig(
            template_id="nli_qa_style",
            k_choices=(12,),
            token_budget=50,
            completion_reserve=10,
            rng_seed=0,
        )
        target = nli_instance(904, "neutral", Split.TEST)
        with pytest.raises(BudgetOverflowError):
            assemble_prompt(target, pool, cfg, random.Random(0))

    def test_pool_exhausted_under_balance(self):
        # only 3 neutral examples but balanced k=24 needs 8 per label
        pool = [ex for ex in nli_pool(60) if ex.instance.gold_label != "neutral"]
        pool += [
            PromptExample(instance=nli_instance(800 + i, "neutral"), explanation="Filler reason.")
            for i in range(3)
        ]
        cfg = PromptConfig(template_id="nli_qa_style", k_choices=(24,), rng_seed=0)
        target = nli_instance(905, "neutral", Split.TEST)
        with pytest.raises(PoolExhaustedError):
            assemble_prompt(target, pool, cfg, random.Random(0))

    def test_k_must_divide_three_for_balanced_nli(self):
        with pytest.raises(ValueError):
            PromptConfig(template_id="nli_qa_style", k_choices=(8, 16), label_balance=True)

    def test_mcqa_choices_shuffled_independently(self):
        pool = mcqa_pool(30)
        cfg = PromptConfig(template_id="mcqa_style", k_choices=(16,), rng_seed=9, label_balance=False)
        target = mcqa_instance(910, split=Split.TEST)
        prompt = assemble_prompt(target, pool, cfg, derive_rng(9, target.id))
        # collect the rendered choice lines; at least two distinct orders of a
        # 5-choice set should appear among 17 independent shuffles
        lines = [l for l in prompt.rendered_text.splitlines() if l.endswith("?") and ", or " in l]
        assert len(lines) == 17
        orders = {l.split(", or ")[0] for l in lines}
        assert len(orders) > 1

    def test_fingerprint_tracks_text(self):
        pool = mcqa_pool(20)
        cfg = PromptConfig(template_id="mcqa_style", k_choices=(8,), rng_seed=4, label_balance=False)
        t1 = mcqa_instance(920, split=Split.TEST)
        t2 = mcqa_instance(921, split=Split.TEST)
        p1 = assemble_prompt(t1, pool, cfg, derive_rng(4, t1.id))
        p2 = assemble_prompt(t2, pool, cfg, derive_rng(4, t2.id))
        assert p1.fingerprint != p2.fingerprint
        assert p1.fingerprint == assemble_prompt(t1, pool, cfg, derive_rng(4, t1.id)).fingerprint
