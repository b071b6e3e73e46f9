import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from explpipe.cli import cli
from explpipe.core.jsonl import load_candidates, load_instances
from explpipe.pipeline.config import ConfigError, RunConfig, apply_overrides, load_config
from explpipe.pipeline.manifest import RunManifest, config_hash, file_sha256
from explpipe.pipeline.stages import (
    MissingUpstreamError,
    run_pipeline,
    stage_aggregate,
    stage_annotate_synthetic,
    stage_evaluate,
    stage_generate,
    stage_predict_labels,
    stage_validate,
)
from explpipe.pipeline.synthetic import (
    PlantedMockClient,
    SyntheticAnnotator,
    build_synthetic_corpus,
)


def small_config(**over) -> RunConfig:
    from dataclasses import replace

    cfg = RunConfig(experiment="t", seed=3)
    cfg = replace(cfg, filter=replace(cfg.filter, dims=2**14, max_epochs=60))
    return replace(cfg, **over) if over else cfg


class TestConfig:
    def test_load_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            """
experiment = "demo"
seed = 11

[prompt]
template = "nli_qa_style"
k_choices = [12, 18, 24]
label_balance = true

[filter]
backend = "nll"

[eval]
threshold = "2of3"
"""
        )
        cfg = load_config(path)
        assert cfg.experiment == "demo"
        assert cfg.seed == 11
        assert cfg.prompt.k_choices == (12, 18, 24)
        assert cfg.filter.backend == "nll"
        assert cfg.eval.threshold == "2of3"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[prompt]\nbananas = 3\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_backend_rejected(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[filter]\nbackend = "magic"\n')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/run.toml")

    def test_overrides(self):
        cfg = apply_overrides(
            RunConfig(), seed=9, backend="nll", threshold="2of3", mode="explanation-only"
        )
        assert cfg.seed == 9
        assert cfg.filter.backend == "nll"
        assert cfg.eval.threshold == "2of3"
        assert cfg.filter.mode == "explanation_only"

    def test_http_endpoint_requires_url(self):
        from dataclasses import replace

        cfg = RunConfig()
        cfg = replace(cfg, endpoint=replace(cfg.endpoint, kind="http", url=""))
        with pytest.raises(ConfigError):
            cfg.validate()


class TestManifest:
    def test_round_trip_and_up_to_date(self, tmp_path):
        (tmp_path / "input.txt").write_text("data")
        manifest = RunManifest(tmp_path)
        h = {"input.txt": file_sha256(tmp_path / "input.txt")}
        ch = config_hash({"a": 1})
        (tmp_path / "out.txt").write_text("out")
        manifest.record("stage-x", ch, h, ["out.txt"])
        assert manifest.is_up_to_date("stage-x", ch, h)
        assert not manifest.is_up_to_date("stage-x", config_hash({"a": 2}), h)
        assert not manifest.is_up_to_date("stage-x", ch, {"input.txt": "deadbeef"})

    def test_missing_output_invalidates(self, tmp_path):
        manifest = RunManifest(tmp_path)
        manifest.record("s", "c", {}, ["gone.txt"])
        assert not manifest.is_up_to_date("s", "c", {})


class TestStageOrdering:
    def test_evaluate_before_aggregate_names_aggregate(self, tmp_path):
        cfg = small_config()
        stage_validate(tmp_path, cfg)
        stage_generate(tmp_path, cfg)
        # skip annotate/aggregate: evaluate must name the missing producer
        with pytest.raises(MissingUpstreamError) as exc:
            stage_evaluate(tmp_path, cfg)
        assert "aggregate" in str(exc.value)

    def test_generate_before_validate_names_validate(self, tmp_path):
        with pytest.raises(MissingUpstreamError) as exc:
            stage_generate(tmp_path, small_config())
        assert "validate" in str(exc.value)


class TestSyntheticWorld:
    def test_corpus_shape(self):
        instances, pool = build_synthetic_corpus(n_train=20, n_dev=5, n_test=10, seed=1)
        assert len(instances) == 35
        assert len({i.id for i in instances}) == 35
        assert all(len(ex.explanation) > 0 for ex in pool)

    def test_planted_mock_guarantees_marked_sample(self):
        client = PlantedMockClient(marker="crucially", seed=2)
        from explpipe.generation.client import CompletionRequest

        marked = 0
        for i in range(30):
            texts = []
            for tag in ["greedy"] + [f"sample{j}" for j in range(1, 5)]:
                req = CompletionRequest(
                    prompt_text="...why?",
                    max_tokens=64,
                    temperature=0.0 if tag == "greedy" else 0.9,
                    stop_sequences=("###", "\n"),
                    want_logprobs=True,
                    seed_tag=f"inst{i}:{tag}",
                )
                texts.append(client.complete(req).text)
            assert any("crucially" in t for t in texts)
            marked += sum("crucially" in t for t in texts)
        assert 30 <= marked < 150  # planted, not universal

    def test_annotator_rule_and_noise(self):
        clean = SyntheticAnnotator("a", "crucially", 0, seed=1)
        assert clean.accept("x", "this is crucially right")
        assert not clean.accept("x", "this is not")
        noisy = SyntheticAnnotator("b", "crucially", 2, seed=1)
        flips = sum(
            noisy.accept(f"i{k}", "crucially yes") != True for k in range(200)
        )
        assert 50 < flips < 150  # about 1 in 2


class TestEndToEnd:
    def test_full_pipeline_emits_metrics(self, tmp_path):
        cfg = small_config()
        results = run_pipeline(tmp_path, cfg)
        assert not any(r.skipped for r in results)
        payload = json.loads((tmp_path / "metrics.json").read_text())
        assert "test" in payload["splits"]
        report = payload["splits"]["test"]
        backend_rows = {b["backend_id"]: b for b in report["backends"]}
        builtin_row = next(v for k, v in backend_rows.items() if k.startswith("builtin"))
        assert builtin_row["ap"] > report["constant_ap"] + 20
        assert (tmp_path / "report.txt").read_text().count("Oracle U.B.") == 2

    def test_rerun_skips_everything(self, tmp_path):
        cfg = small_config()
        run_pipeline(tmp_path, cfg)
        again = run_pipeline(tmp_path, cfg)
        assert all(r.skipped for r in again)

    def test_forced_rerun_byte_identical_with_warm_cache(self, tmp_path):
        cfg = small_config()
        run_pipeline(tmp_path, cfg)
        before = {
            name: (tmp_path / name).read_bytes()
            for name in [
                "instances.jsonl",
                "prompt_pool.jsonl",
                "candidates.jsonl",
                "judgments.jsonl",
                "labels.jsonl",
                "training_set.jsonl",
                "filter_model.bin",
                "scores.jsonl",
                "selections.jsonl",
            ]
        }
        run_pipeline(tmp_path, cfg, force=True)
        for name, blob in before.items():
            assert (tmp_path / name).read_bytes() == blob, name

    def test_predict_labels_stage(self, tmp_path):
        cfg = small_config()
        stage_validate(tmp_path, cfg)
        result = stage_predict_labels(tmp_path, cfg)
        assert (tmp_path / "predictions.jsonl").exists()
        summary = json.loads((tmp_path / "label_accuracy.json").read_text())
        assert 0.0 <= summary["accuracy"] <= 100.0
        assert summary["n"] == len(load_instances(tmp_path / "instances.jsonl"))

    def test_aggregate_recomputation_is_pure(self, tmp_path):
        cfg = small_config()
        stage_validate(tmp_path, cfg)
        stage_generate(tmp_path, cfg)
        stage_annotate_synthetic(tmp_path, cfg)
        stage_aggregate(tmp_path, cfg)
        first = (tmp_path / "labels.jsonl").read_bytes()
        stage_aggregate(tmp_path, cfg, force=True)
        assert (tmp_path / "labels.jsonl").read_bytes() == first


class TestCLI:
    def test_stagewise_cli_flow(self, tmp_path):
        runner = CliRunner()
        run_dir = str(tmp_path / "run")
        for command in ["validate", "generate", "annotate-synthetic", "aggregate"]:
            result = runner.invoke(cli, [command, "--run-dir", run_dir, "--seed", "3"])
            assert result.exit_code == 0, f"{command}: {result.output}"
        assert Path(run_dir, "labels.jsonl").exists()

    def test_upstream_missing_exit_code_3(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli, ["evaluate", "--run-dir", str(tmp_path)])
        assert result.exit_code == 3
        assert "aggregate" in result.output or "labels.jsonl" in result.output

    def test_config_error_exit_code_2(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[filter]\nbackend = "nope"\n')
        runner = CliRunner()
        result = runner.invoke(
            cli, ["validate", "--config", str(bad), "--run-dir", str(tmp_path / "r")]
        )
        assert result.exit_code == 2

    def test_nll_backend_via_flag(self, tmp_path):
        runner = CliRunner()
        run_dir = str(tmp_path / "run")
        for command in [
            "validate",
            "generate",
            "annotate-synthetic",
            "aggregate",
            "build-labels",
        ]:
            assert runner.invoke(cli, [command, "--run-dir", run_dir, "--seed", "3"]).exit_code == 0
        for command in ["score", "select", "evaluate", "report"]:
            result = runner.invoke(
                cli, [command, "--run-dir", run_dir, "--seed", "3", "--backend", "nll"]
            )
            assert result.exit_code == 0, f"{command}: {result.output}"
        report = (Path(run_dir) / "report.txt").read_text()
        assert "nll:sum" in report

    def test_endpoint_failure_exit_code_4(self, tmp_path):
        toml = tmp_path / "run.toml"
        toml.write_text(
            """
[endpoint]
kind = "http"
url = "http://127.0.0.1:1"
max_retries = 0
backoff_seconds = 0.0
"""
        )
        runner = CliRunner()
        run_dir = str(tmp_path / "run")
        assert runner.invoke(cli, ["validate", "--config", str(toml), "--run-dir", run_dir]).exit_code == 0
        result = runner.invoke(cli, ["generate", "--config", str(toml), "--run-dir", run_dir])
        assert result.exit_code == 4

    def test_check_subcommand(self, tmp_path):
        runner = CliRunner()
        run_dir = str(tmp_path / "run")
        assert runner.invoke(cli, ["validate", "--run-dir", run_dir]).exit_code == 0
        result = runner.invoke(cli, ["check", "--run-dir", run_dir])
        assert result.exit_code == 0
        assert "ok" in result.output
