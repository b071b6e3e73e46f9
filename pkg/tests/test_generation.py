import json

import httpx
import pytest

from explpipe.core.types import PromptExample, Split, Task, TaskInstance
from explpipe.generation.cache import CachingClient, CompletionCache
from explpipe.generation.client import (
    Completion,
    CompletionRequest,
    EndpointError,
    HTTPCompletionClient,
    MockCompletionClient,
    RetryingClient,
)
from explpipe.generation.runs import (
    GenerationConfig,
    generate_candidates,
    label_prediction_accuracy,
    parse_label_completion,
    predict_label,
    sample_beats_greedy_fraction,
    trim_completion,
)
from explpipe.prompts.assemble import PromptConfig, derive_rng

from tests.test_prompts import mcqa_instance, mcqa_pool, nli_instance, nli_pool


def request(prompt="p", temperature=0.0, seed_tag="t", want_logprobs=True):
    return CompletionRequest(
        prompt_text=prompt,
        max_tokens=64,
        temperature=temperature,
        stop_sequences=("###", "\n"),
        want_logprobs=want_logprobs,
        seed_tag=seed_tag,
    )


class TestMockClient:
    def test_scripted_responses_in_order(self):
        client = MockCompletionClient.from_texts(["first", "second"])
        assert client.complete(request(seed_tag="a")).text == "first"
        assert client.complete(request(seed_tag="b")).text == "second"

    def test_logprobs_match_token_count(self):
        client = MockCompletionClient.from_texts(["three token completion"])
        completion = client.complete(request())
        assert len(completion.token_logprobs) == len(completion.tokens) == 3
        assert all(lp <= 0 for lp in completion.token_logprobs)

    def test_retry_after_transient_failure(self):
        inner = MockCompletionClient.from_texts(["ok"])
        inner.fail_first = 1
        client = RetryingClient(inner, max_retries=2)
        assert client.complete(request()).text == "ok"
        assert inner.calls == 2

    def test_retries_exhausted(self):
        inner = MockCompletionClient.from_texts(["never"])
        inner.fail_first = 10
        client = RetryingClient(inner, max_retries=2)
        with pytest.raises(EndpointError):
            client.complete(request())


class TestHTTPClient:
    def _transport(self, handler):
        return httpx.MockTransport(handler)

    def test_parses_openai_shape(self):
        def handler(req):
            body = json.loads(req.content)
            assert body["prompt"] == "p"
            assert body["user"] == "t"
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {
                            "text": " an explanation",
                            "logprobs": {
                                "tokens": [" an", " explanation"],
                                "token_logprobs": [-0.5, -1.5],
                            },
                        }
                    ]
                },
            )

        client = HTTPCompletionClient(
            base_url="http://mock", model="m", transport=self._transport(handler)
        )
        completion = client.complete(request())
        assert completion.text == " an explanation"
        assert completion.token_logprobs == (-0.5, -1.5)

    def test_retries_on_500_then_succeeds(self):
        state = {"n": 0}

        def handler(req):
            state["n"] += 1
            if state["n"] == 1:
                return httpx.Response(500)
            return httpx.Response(200, json={"choices": [{"text": "ok"}]})

        client = HTTPCompletionClient(
            base_url="http://mock",
            model="m",
            transport=self._transport(handler),
            backoff_base=0.0,
        )
        assert client.complete(request()).text == "ok"
        assert state["n"] == 2

    def test_malformed_body_raises(self):
        client = HTTPCompletionClient(
            base_url="http://mock",
            model="m",
            transport=self._transport(lambda req: httpx.Response(200, json={"oops": 1})),
        )
        with pytest.raises(EndpointError):
            client.complete(request())


class TestCache:
    def test_repeat_request_served_from_cache(self, tmp_path):
        inner = MockCompletionClient(responder=lambda r: f"resp:{r.seed_tag}")
        client = CachingClient(inner, CompletionCache(tmp_path))
        first = client.complete(request(seed_tag="x"))
        again = client.complete(request(seed_tag="x"))
        assert first == again
        assert inner.calls == 1  # zero network calls on the second hit
        assert client.hits == 1

    def test_distinct_seed_tags_are_distinct_entries(self, tmp_path):
        inner = MockCompletionClient(responder=lambda r: f"resp:{r.seed_tag}")
        client = CachingClient(inner, CompletionCache(tmp_path))
        a = client.complete(request(seed_tag="a"))
        b = client.complete(request(seed_tag="b"))
        assert a.text != b.text
        assert inner.calls == 2

    def test_cache_persists_across_clients(self, tmp_path):
        inner1 = MockCompletionClient(responder=lambda r: "generated once")
        CachingClient(inner1, CompletionCache(tmp_path)).complete(request())
        inner2 = MockCompletionClient(responder=lambda r: "would differ")
        got = CachingClient(inner2, CompletionCache(tmp_path)).complete(request())
        assert got.text == "generated once"
        assert inner2.calls == 0

    def test_params_change_key(self):
        r1 = request(temperature=0.0)
        r2 = request(temperature=0.9)
        assert r1.cache_key("ns") != r2.cache_key("ns")
        assert r1.cache_key("ns") != r1.cache_key("other-model")


class TestRateLimiter:
    def test_minimum_interval_between_requests(self):
        import time

        from explpipe.generation.client import RateLimitedClient

        inner = MockCompletionClient(responder=lambda r: "ok")
        client = RateLimitedClient(inner, min_interval=0.05)
        start = time.monotonic()
        for i in range(4):
            client.complete(request(seed_tag=f"t{i}"))
        elapsed = time.monotonic() - start
        assert elapsed >= 0.15  # three enforced gaps
        assert inner.calls == 4

    def test_thread_pool_preserves_instance_order(self, tmp_path):
        from dataclasses import replace

        from explpipe.core.jsonl import load_candidates
        from explpipe.pipeline.config import RunConfig
        from explpipe.pipeline.stages import stage_generate, stage_validate

        cfg = RunConfig(experiment="par", seed=2)
        cfg = replace(cfg, generation=replace(cfg.generation, parallel_requests=4))
        stage_validate(tmp_path, cfg)
        stage_generate(tmp_path, cfg)
        candidates = load_candidates(tmp_path / "candidates.jsonl")
        instance_order = []
        for c in candidates:
            if not instance_order or instance_order[-1] != c.instance_id:
                instance_order.append(c.instance_id)
        assert instance_order == sorted(instance_order)  # synthetic ids are ordered


class TestTrimming:
    def test_cut_at_separator(self):
        assert trim_completion("good reason ### next block", ("###", "\n"))[0] == "good reason "

    def test_cut_at_newline(self):
        assert trim_completion("one line\nsecond line", ("###", "\n"))[0] == "one line"

    def test_no_stops(self):
        text = "plain explanation"
        assert trim_completion(text, ("###", "\n"))[0] == text


class TestGeneration:
    def _run(self, responder=None, n_sampled=4):
        pool = mcqa_pool(30)
        instance = mcqa_instance(700, split=Split.TEST)
        cfg = PromptConfig(
            template_id="mcqa_style", k_choices=(8,), rng_seed=3, label_balance=False
        )
        client = MockCompletionClient(
            responder=responder or (lambda r: f"explanation for {r.seed_tag}")
        )
        run = generate_candidates(
            instance, pool, cfg, GenerationConfig(n_sampled=n_sampled), client
        )
        return run, client

    def test_five_candidates_greedy_first(self):
        run, _ = self._run()
        assert len(run.candidates) == 5
        assert run.candidates[0].decode == "greedy"
        assert [c.sample_index for c in run.candidates] == [None, 1, 2, 3, 4]

    def test_zero_sampling_temperature_rejected(self):
        with pytest.raises(ValueError):
            GenerationConfig(temperature=0.0)

    def test_total_logprob_is_sum(self):
        run, _ = self._run()
        for c in run.candidates:
            assert c.total_logprob == pytest.approx(sum(c.token_logprobs), abs=1e-9)

    def test_candidates_trimmed_at_stop(self):
        run, _ = self._run(responder=lambda r: "the reason ### leaked next block")
        for c in run.candidates:
            assert "###" not in c.text
            assert c.text == "the reason"

    def test_trim_realigns_logprobs(self):
        run, _ = self._run(responder=lambda r: "kept tokens here\ndropped tail")
        for c in run.candidates:
            assert c.text == "kept tokens here"
            assert len(c.token_logprobs) == 3

    def test_empty_completion_flagged_degenerate(self):
        run, _ = self._run(responder=lambda r: "   ")
        assert all(c.degenerate for c in run.candidates)
        assert all(c.text == "" for c in run.candidates)

    def test_shared_prompt_fingerprint(self):
        run, _ = self._run()
        assert len({c.prompt_fingerprint for c in run.candidates}) == 1

    def test_dominance_fraction_counts_upsets(self):
        runs = []
        for i in range(10):
            pool = mcqa_pool(30)
            instance = mcqa_instance(800 + i, split=Split.TEST)
            cfg = PromptConfig(
                template_id="mcqa_style", k_choices=(8,), rng_seed=5, label_balance=False
            )

            def responder(r, i=i):
                # instance 0 gets a greedy so long that a short sample wins on NLL
                if r.greedy and i == 0:
                    return "a very long greedy explanation with many many tokens inside"
                return "short answer"

            runs.append(
                generate_candidates(
                    instance, pool, cfg, GenerationConfig(), MockCompletionClient(responder=responder)
                )
            )
        fraction = sample_beats_greedy_fraction(runs)
        assert fraction == pytest.approx(1 / 10)


class TestLabelPrediction:
    def test_nli_true_maps_to_entailment(self):
        pool = nli_pool(30)
        instance = nli_instance(700, "entailment", Split.TEST)
        cfg = PromptConfig.for_task(Task.NLI, rng_seed=2)
        client = MockCompletionClient(responder=lambda r: " true")
        pred = predict_label(instance, pool, cfg, client)
        assert pred.parse_ok
        assert pred.predicted_label == "entailment"

    def test_gibberish_flagged_incorrect(self):
        pool = nli_pool(30)
        instance = nli_instance(701, "neutral", Split.TEST)
        cfg = PromptConfig.for_task(Task.NLI, rng_seed=2)
        client = MockCompletionClient(responder=lambda r: "xyzzy blorp")
        pred = predict_label(instance, pool, cfg, client)
        assert not pred.parse_ok
        assert pred.predicted_label is None
        assert label_prediction_accuracy([pred], [instance]) == 0.0

    def test_oracle_mock_scores_100(self):
        pool = mcqa_pool(30)
        cfg = PromptConfig(
            template_id="mcqa_style", k_choices=(8,), rng_seed=4, label_balance=False
        )
        instances = [mcqa_instance(810 + i, split=Split.TEST) for i in range(10)]
        gold = {f"{inst.id}:label": inst.gold_label for inst in instances}
        client = MockCompletionClient(responder=lambda r: gold[r.seed_tag])
        preds = [predict_label(inst, pool, cfg, client) for inst in instances]
        assert label_prediction_accuracy(preds, instances) == 100.0

    def test_label_prompt_has_no_why(self):
        pool = nli_pool(30)
        instance = nli_instance(702, "contradiction", Split.TEST)
        cfg = PromptConfig.for_task(Task.NLI, rng_seed=2)
        seen = {}

        def responder(r):
            seen["prompt"] = r.prompt_text
            return "false"

        predict_label(instance, pool, cfg, MockCompletionClient(responder=responder))
        assert "why?" not in seen["prompt"]
        assert seen["prompt"].endswith("true, false, or neither?")

    def test_longest_match_prefers_longer_choice(self):
        vocab = {"employed": "employed", "being employed": "being employed"}
        assert parse_label_completion("being employed", vocab) == "being employed"
