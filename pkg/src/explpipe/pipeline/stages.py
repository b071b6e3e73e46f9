"""Pipeline stages. Each stage checks its upstream artifacts (naming the
stage that produces a missing one), skips itself when the manifest says its
config and inputs are unchanged, does its work, and records a manifest entry.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from explpipe.annotation.studies import StudyStore, aggregate_from_judgments
from explpipe.core.ingest import ingest_corpus, validate_run_dir
from explpipe.core.jsonl import (
    load_candidates,
    load_instances,
    load_judgments,
    load_labels,
    load_prompt_pool,
    read_records,
    save_candidates,
    save_instances,
    save_labels,
    save_prompt_pool,
    write_records,
)
from explpipe.core.types import ExplanationCandidate, TaskInstance
from explpipe.filtering.backends import (
    ExternalScorerClient,
    FilterScoreSet,
    score_builtin,
    score_external,
    score_nll,
    select_one,
)
from explpipe.filtering.hashed_linear import HashedLinearModel, TrainerConfig, train_model
from explpipe.generation.cache import CachingClient, CompletionCache
from explpipe.generation.client import HTTPCompletionClient
from explpipe.generation.runs import (
    GenerationConfig,
    generate_candidates,
    label_prediction_accuracy,
    predict_label,
    sample_beats_greedy_fraction,
)
from explpipe.metrics.ranking import (
    UndefinedMetricError,
    average_precision,
    constant_baseline,
    oracle_select1,
    random_baseline_ap,
    random_baseline_select1,
    select1_accuracy,
)
from explpipe.metrics.report import BackendRow, MetricsReport, per_item_csv, render_table
from explpipe.pipeline.config import ConfigError, RunConfig
from explpipe.pipeline.manifest import RunManifest, config_hash, file_sha256
from explpipe.pipeline.synthetic import (
    PlantedMockClient,
    TickingClock,
    build_synthetic_corpus,
    default_annotators,
    run_synthetic_annotation,
)
from explpipe.prompts.assemble import PromptConfig, assemble_prompt, derive_rng

log = logging.getLogger(__name__)

PRODUCERS = {
    "instances.jsonl": "validate",
    "prompt_pool.jsonl": "validate",
    "prompts.jsonl": "prompts",
    "candidates.jsonl": "generate",
    "predictions.jsonl": "predict-labels",
    "judgments.jsonl": "annotate-synthetic (or serve)",
    "studies.jsonl": "annotate-synthetic (or serve)",
    "labels.jsonl": "aggregate",
    "training_set.jsonl": "build-labels",
    "filter_model.bin": "train-filter",
    "scores.jsonl": "score",
    "selections.jsonl": "select",
    "metrics.json": "evaluate",
}


class MissingUpstreamError(Exception):
    def __init__(self, artifact: str, producing_stage: str):
        super().__init__(
            f"missing {artifact}; run the '{producing_stage}' stage first"
        )
        self.artifact = artifact
        self.producing_stage = producing_stage


class ValidationFailure(Exception):
    pass


@dataclass(frozen=True)
class StageResult:
    stage: str
    skipped: bool
    outputs: tuple[str, ...]
    info: Mapping[str, object] = field(default_factory=dict)

    def describe(self) -> str:
        if self.skipped:
            return f"[{self.stage}] up to date, skipped"
        details = ", ".join(f"{k}={v}" for k, v in self.info.items())
        return f"[{self.stage}] wrote {', '.join(self.outputs)}" + (
            f" ({details})" if details else ""
        )


def _require(run_dir: Path, artifact: str) -> Path:
    path = run_dir / artifact
    if not path.exists():
        raise MissingUpstreamError(artifact, PRODUCERS.get(artifact, "unknown"))
    return path


def _stage(
    run_dir: Path,
    stage_name: str,
    cfg_payload: object,
    inputs: Mapping[str, Path],
    outputs: Sequence[str],
    force: bool,
    work: Callable[[], Optional[Mapping[str, object]]],
) -> StageResult:
    manifest = RunManifest(run_dir)
    cfg_h = config_hash(cfg_payload)
    input_hashes = {name: file_sha256(path) for name, path in inputs.items()}
    if not force and manifest.is_up_to_date(stage_name, cfg_h, input_hashes):
        return StageResult(stage_name, skipped=True, outputs=tuple(outputs))
    info = work() or {}
    manifest.record(stage_name, cfg_h, input_hashes, outputs)
    return StageResult(stage_name, skipped=False, outputs=tuple(outputs), info=dict(info))


def _prompt_config(cfg: RunConfig) -> PromptConfig:
    return PromptConfig(
        template_id=cfg.prompt.template,
        k_choices=cfg.prompt.k_choices,
        token_budget=cfg.prompt.token_budget,
        completion_reserve=cfg.prompt.completion_reserve,
        shuffle_choices=cfg.prompt.shuffle_choices,
        label_balance=cfg.prompt.label_balance,
        rng_seed=cfg.seed,
    )


def _build_client(cfg: RunConfig, run_dir: Path):
    if cfg.endpoint.kind == "mock-planted":
        inner = PlantedMockClient(marker=cfg.annotation.synthetic_marker, seed=cfg.seed)
    else:
        inner = HTTPCompletionClient(
            base_url=cfg.endpoint.url,
            model=cfg.endpoint.model,
            auth_token=os.environ.get(cfg.endpoint.token_env),
            max_retries=cfg.endpoint.max_retries,
            backoff_base=cfg.endpoint.backoff_seconds,
        )
    return CachingClient(inner, CompletionCache(run_dir / "cache"))


# ----- stages ------------------------------------------------------------


def stage_validate(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Ingest (or synthesize) the corpus into the run directory and check
    referential integrity across whatever artifacts already exist."""
    inputs = {}
    if cfg.dataset.instances:
        src = Path(cfg.dataset.instances)
        if not src.exists():
            raise ConfigError(f"dataset.instances path {src} does not exist")
        inputs["dataset.instances"] = src
    if cfg.dataset.prompt_pool:
        src = Path(cfg.dataset.prompt_pool)
        if not src.exists():
            raise ConfigError(f"dataset.prompt_pool path {src} does not exist")
        inputs["dataset.prompt_pool"] = src

    def work():
        run_dir.mkdir(parents=True, exist_ok=True)
        if cfg.dataset.instances:
            instances = ingest_corpus(cfg.dataset.instances, cfg.dataset.format)
            pool = load_prompt_pool(cfg.dataset.prompt_pool)
        else:
            instances, pool = build_synthetic_corpus(seed=cfg.seed)
        save_instances(run_dir / "instances.jsonl", instances)
        save_prompt_pool(run_dir / "prompt_pool.jsonl", pool)
        problems = validate_run_dir(run_dir)
        if problems:
            raise ValidationFailure(
                f"{len(problems)} integrity problems, first: {problems[0]}"
            )
        return {"instances": len(instances), "pool": len(pool)}

    return _stage(
        run_dir,
        "validate",
        {"dataset": cfg.dataset.__dict__, "seed": cfg.seed},
        inputs,
        ["instances.jsonl", "prompt_pool.jsonl"],
        force,
        work,
    )


def stage_prompts(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Dry-run prompt renders for inspection (generation re-derives them)."""
    instances_path = _require(run_dir, "instances.jsonl")
    pool_path = _require(run_dir, "prompt_pool.jsonl")

    def work():
        instances = load_instances(instances_path)
        pool = load_prompt_pool(pool_path)
        prompt_cfg = _prompt_config(cfg)
        records = []
        for inst in instances:
            prompt = assemble_prompt(inst, pool, prompt_cfg, derive_rng(cfg.seed, inst.id))
            records.append(prompt.to_record())
        write_records(run_dir / "prompts.jsonl", "prompt", records)
        return {"prompts": len(records)}

    return _stage(
        run_dir,
        "prompts",
        {"prompt": cfg.prompt.__dict__, "seed": cfg.seed},
        {"instances.jsonl": instances_path, "prompt_pool.jsonl": pool_path},
        ["prompts.jsonl"],
        force,
        work,
    )


def stage_generate(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Overgenerate 1 greedy + n sampled candidates per instance."""
    instances_path = _require(run_dir, "instances.jsonl")
    pool_path = _require(run_dir, "prompt_pool.jsonl")

    def work():
        instances = load_instances(instances_path)
        pool = load_prompt_pool(pool_path)
        prompt_cfg = _prompt_config(cfg)
        gen_cfg = GenerationConfig(
            n_sampled=cfg.generation.n_sampled,
            temperature=cfg.generation.temperature,
            max_tokens=cfg.generation.max_tokens,
        )
        caching_client = _build_client(cfg, run_dir)
        client = caching_client
        gen = cfg.generation
        if gen.min_request_interval > 0:
            from explpipe.generation.client import RateLimitedClient

            client = RateLimitedClient(client, gen.min_request_interval)
        if gen.parallel_requests > 1:
            # worker pool; results land in instance order regardless of
            # completion order (executor.map preserves input order)
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=gen.parallel_requests) as pool_exec:
                runs = list(
                    pool_exec.map(
                        lambda inst: generate_candidates(
                            inst, pool, prompt_cfg, gen_cfg, client
                        ),
                        instances,
                    )
                )
        else:
            runs = [
                generate_candidates(inst, pool, prompt_cfg, gen_cfg, client)
                for inst in instances
            ]
        candidates = [c for run in runs for c in run.candidates]
        save_candidates(run_dir / "candidates.jsonl", candidates)
        return {
            "candidates": len(candidates),
            "cache_hits": caching_client.hits,
            "sample_beats_greedy": round(sample_beats_greedy_fraction(runs), 4),
        }

    return _stage(
        run_dir,
        "generate",
        {
            "prompt": cfg.prompt.__dict__,
            "generation": cfg.generation.__dict__,
            "endpoint": cfg.endpoint.__dict__,
            "seed": cfg.seed,
        },
        {"instances.jsonl": instances_path, "prompt_pool.jsonl": pool_path},
        ["candidates.jsonl"],
        force,
        work,
    )


def stage_predict_labels(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Few-shot label prediction over the corpus (prompting without "why?")."""
    instances_path = _require(run_dir, "instances.jsonl")
    pool_path = _require(run_dir, "prompt_pool.jsonl")

    def work():
        instances = load_instances(instances_path)
        pool = load_prompt_pool(pool_path)
        prompt_cfg = _prompt_config(cfg)
        client = _build_client(cfg, run_dir)
        predictions = [predict_label(inst, pool, prompt_cfg, client) for inst in instances]
        write_records(
            run_dir / "predictions.jsonl", "prediction", [p.to_record() for p in predictions]
        )
        accuracy = label_prediction_accuracy(predictions, instances)
        summary = {
            "accuracy": accuracy,
            "n": len(predictions),
            "parse_failures": sum(1 for p in predictions if not p.parse_ok),
        }
        (run_dir / "label_accuracy.json").write_text(json.dumps(summary, indent=2))
        return summary

    return _stage(
        run_dir,
        "predict-labels",
        {"prompt": cfg.prompt.__dict__, "endpoint": cfg.endpoint.__dict__, "seed": cfg.seed},
        {"instances.jsonl": instances_path, "prompt_pool.jsonl": pool_path},
        ["predictions.jsonl", "label_accuracy.json"],
        force,
        work,
    )


def stage_annotate_synthetic(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Collect acceptability judgments from the synthetic annotators through
    the real study store (claim, lease, submit)."""
    candidates_path = _require(run_dir, "candidates.jsonl")
    instances_path = _require(run_dir, "instances.jsonl")

    def work():
        for name in ("judgments.jsonl", "studies.jsonl", "qualifications.jsonl"):
            path = run_dir / name
            if path.exists():
                path.unlink()
        candidates = load_candidates(candidates_path)
        instances = {i.id: i for i in load_instances(instances_path)}
        store = StudyStore(root_dir=run_dir, clock=TickingClock())
        items = []
        for c in candidates:
            inst = instances[c.instance_id]
            items.append(
                {
                    "item_id": c.candidate_id,
                    "context": inst.question
                    if inst.question
                    else f"{inst.premise} / {inst.hypothesis}",
                    "gold_label": inst.gold_label,
                    "explanation": c.text,
                    "source": c.decode,  # provenance; stripped from rater views
                }
            )
        study = store.create_study(
            "acceptability",
            items,
            raters_per_item=cfg.annotation.raters_per_item,
            batch_size=cfg.annotation.batch_size,
            study_id=f"accept-{cfg.experiment}",
        )
        annotators = default_annotators(
            cfg.annotation.synthetic_marker,
            cfg.seed,
            with_noise=cfg.annotation.synthetic_noise_annotator,
        )
        n = run_synthetic_annotation(store, study, annotators)
        return {"judgments": n, "pages": len(study.pages)}

    return _stage(
        run_dir,
        "annotate-synthetic",
        {"annotation": cfg.annotation.__dict__, "seed": cfg.seed},
        {"candidates.jsonl": candidates_path},
        ["judgments.jsonl", "studies.jsonl"],
        force,
        work,
    )


def stage_aggregate(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Binary judgments -> per-candidate consensus labels."""
    judgments_path = _require(run_dir, "judgments.jsonl")

    def work():
        judgments = load_judgments(judgments_path)
        labels, incomplete = aggregate_from_judgments(
            judgments, n_raters=cfg.annotation.raters_per_item
        )
        if incomplete:
            log.warning("%d items incomplete, excluded from labels", incomplete)
        save_labels(run_dir / "labels.jsonl", labels)
        histogram = {
            str(k): sum(1 for lab in labels if lab.n_accept == k)
            for k in range(cfg.annotation.raters_per_item + 1)
        }
        return {"labels": len(labels), "incomplete": incomplete, **histogram}

    return _stage(
        run_dir,
        "aggregate",
        {"raters_per_item": cfg.annotation.raters_per_item},
        {"judgments.jsonl": judgments_path},
        ["labels.jsonl"],
        force,
        work,
    )


def stage_build_labels(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Assemble the filter training set under the configured label scheme."""
    candidates_path = _require(run_dir, "candidates.jsonl")
    instances_path = _require(run_dir, "instances.jsonl")
    labels_path = _require(run_dir, "labels.jsonl")
    judgments_path = _require(run_dir, "judgments.jsonl")

    def work():
        from explpipe.filtering.inputs import build_training_set, format_filter_input

        training_set = build_training_set(
            candidates=load_candidates(candidates_path),
            instances=load_instances(instances_path),
            labels=load_labels(labels_path),
            judgments=load_judgments(judgments_path),
            scheme=cfg.filter.scheme,
            mode=cfg.filter.mode,
            rng_seed=cfg.seed,
        )
        records = [
            {
                "candidate_id": ex.candidate_id,
                "instance_id": ex.instance_id,
                "split": ex.split,
                "label": ex.label,
                "mode": training_set.mode,
                "scheme": training_set.label_scheme,
                "text": format_filter_input(ex.filter_input),
            }
            for ex in training_set.examples
        ]
        write_records(run_dir / "training_set.jsonl", "training_example", records)
        return {
            "examples": len(records),
            "positives": sum(r["label"] for r in records),
            "excluded": training_set.n_excluded,
        }

    return _stage(
        run_dir,
        "build-labels",
        {"filter": cfg.filter.__dict__, "seed": cfg.seed},
        {
            "candidates.jsonl": candidates_path,
            "instances.jsonl": instances_path,
            "labels.jsonl": labels_path,
            "judgments.jsonl": judgments_path,
        },
        ["training_set.jsonl"],
        force,
        work,
    )


def stage_train_filter(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Train the built-in acceptability classifier on the training split."""
    training_path = _require(run_dir, "training_set.jsonl")

    def work():
        records = read_records(training_path, "training_example")
        train = [r for r in records if r["split"] == "train"]
        dev = [r for r in records if r["split"] == "dev"]
        trainer_cfg = TrainerConfig(
            dims=cfg.filter.dims,
            max_epochs=cfg.filter.max_epochs,
            patience=cfg.filter.patience,
            seed=cfg.seed,
        )
        if not dev:
            from explpipe.filtering.hashed_linear import split_for_validation

            val_ids = split_for_validation(
                [r["instance_id"] for r in train], trainer_cfg.val_fraction, cfg.seed
            )
            dev = [r for r in train if r["instance_id"] in val_ids]
            train = [r for r in train if r["instance_id"] not in val_ids]
        model, history = train_model(
            train_texts=[r["text"] for r in train],
            train_labels=[r["label"] for r in train],
            val_texts=[r["text"] for r in dev],
            val_labels=[r["label"] for r in dev],
            cfg=trainer_cfg,
            mode=cfg.filter.mode,
        )
        model.save(run_dir / "filter_model.bin")
        (run_dir / "train_history.json").write_text(
            json.dumps(history.__dict__, indent=2, sort_keys=True)
        )
        return {
            "train_examples": len(train),
            "val_examples": len(dev),
            "epochs": history.epochs_run,
            "val_accuracy": round(history.val_accuracy, 4),
        }

    return _stage(
        run_dir,
        "train-filter",
        {"filter": cfg.filter.__dict__, "seed": cfg.seed},
        {"training_set.jsonl": training_path},
        ["filter_model.bin", "train_history.json"],
        force,
        work,
    )


def _load_labeled_world(run_dir: Path):
    instances = load_instances(_require(run_dir, "instances.jsonl"))
    candidates = load_candidates(_require(run_dir, "candidates.jsonl"))
    labels = load_labels(_require(run_dir, "labels.jsonl"))
    return instances, candidates, labels


def stage_score(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Score every candidate with the configured backend."""
    candidates_path = _require(run_dir, "candidates.jsonl")
    instances_path = _require(run_dir, "instances.jsonl")
    backend = cfg.filter.backend
    inputs = {"candidates.jsonl": candidates_path}
    if backend == "builtin":
        inputs["filter_model.bin"] = _require(run_dir, "filter_model.bin")

    def work():
        candidates = load_candidates(candidates_path)
        instances = {i.id: i for i in load_instances(instances_path)}
        info: dict[str, object] = {"backend": backend}
        if backend == "nll":
            score_set = score_nll(candidates)
        elif backend == "builtin":
            model = HashedLinearModel.load(run_dir / "filter_model.bin")
            score_set = score_builtin(model, candidates, instances)
        else:
            client = ExternalScorerClient(backend.split(":", 1)[1])
            score_set, failures = score_external(
                client, candidates, instances, mode=cfg.filter.mode
            )
            if failures:
                log.warning("%d candidates failed external scoring", len(failures))
                info["failures"] = len(failures)
        write_records(run_dir / "scores.jsonl", "score", score_set.to_records())
        info["backend_id"] = score_set.backend_id
        if cfg.filter.audit_inputs and backend != "nll":
            from explpipe.filtering.inputs import (
                filter_input_for_candidate,
                format_filter_input,
            )

            audit = [
                {
                    "candidate_id": c.candidate_id,
                    "text": format_filter_input(
                        filter_input_for_candidate(c, instances[c.instance_id], cfg.filter.mode)
                    ),
                }
                for c in candidates
                if not c.degenerate
            ]
            write_records(run_dir / "filter_inputs.jsonl", "filter_input", audit)
            info["audited_inputs"] = len(audit)
        return info

    return _stage(
        run_dir,
        "score",
        {"filter": cfg.filter.__dict__},
        inputs,
        ["scores.jsonl"],
        force,
        work,
    )


def _group_by_instance(
    candidates: Sequence[ExplanationCandidate],
) -> dict[str, list[ExplanationCandidate]]:
    grouped: dict[str, list[ExplanationCandidate]] = {}
    for c in candidates:
        grouped.setdefault(c.instance_id, []).append(c)
    return grouped


def stage_select(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Pick the top-scored candidate per instance (select-1)."""
    candidates_path = _require(run_dir, "candidates.jsonl")
    scores_path = _require(run_dir, "scores.jsonl")

    def work():
        candidates = load_candidates(candidates_path)
        score_set = FilterScoreSet.from_records(read_records(scores_path, "score"))
        values = score_set.as_dict()
        records = []
        for instance_id, group in _group_by_instance(candidates).items():
            scored = [c for c in group if c.candidate_id in values]
            if not scored:
                continue
            sub = FilterScoreSet(
                backend_id=score_set.backend_id,
                kind=score_set.kind,
                scores=tuple(
                    s for s in score_set.scores if s.candidate_id in {c.candidate_id for c in scored}
                ),
            )
            chosen = select_one(scored, sub)
            records.append(
                {
                    "instance_id": instance_id,
                    "candidate_id": chosen.candidate_id,
                    "backend_id": score_set.backend_id,
                }
            )
        write_records(run_dir / "selections.jsonl", "selection", records)
        return {"selections": len(records), "backend_id": score_set.backend_id}

    return _stage(
        run_dir,
        "select",
        {"filter": cfg.filter.__dict__},
        {"candidates.jsonl": candidates_path, "scores.jsonl": scores_path},
        ["selections.jsonl"],
        force,
        work,
    )


def _split_report(
    split: str,
    cfg: RunConfig,
    instances: Sequence[TaskInstance],
    candidates: Sequence[ExplanationCandidate],
    labels_by_cid: Mapping[str, object],
    score_set: FilterScoreSet,
    selections: Mapping[str, str],
    alpha: Optional[float],
    extras: Mapping[str, float],
) -> Optional[MetricsReport]:
    split_ids = {i.id for i in instances if i.split.value == split}
    split_cands = [c for c in candidates if c.instance_id in split_ids]
    split_cands = [c for c in split_cands if c.candidate_id in labels_by_cid]
    if not split_cands:
        return None
    threshold = cfg.eval.threshold
    flat_labels = [labels_by_cid[c.candidate_id] for c in split_cands]
    by_instance: dict[str, list] = {}
    for c in split_cands:
        by_instance.setdefault(c.instance_id, []).append(labels_by_cid[c.candidate_id])

    random_s1 = random_baseline_select1(
        by_instance, threshold, cfg.eval.n_random_trials, cfg.seed
    )
    random_ap = random_baseline_ap(flat_labels, threshold, cfg.eval.n_random_trials, cfg.seed)
    constant = constant_baseline(flat_labels, threshold)
    oracle = oracle_select1(by_instance, threshold)
    flags = [lab.positive(threshold) for lab in flat_labels]

    def ap_or_none(values: Sequence[float]) -> Optional[float]:
        try:
            return average_precision(values, flags)
        except UndefinedMetricError:
            return None

    rows = []
    with_logprobs = [c for c in split_cands if c.token_logprobs or c.degenerate]
    if len(with_logprobs) == len(split_cands):
        nll = score_nll(split_cands)
        nll_values = nll.as_dict()
        nll_selections = {}
        for iid, group in _group_by_instance(split_cands).items():
            sub = FilterScoreSet(
                backend_id=nll.backend_id,
                kind="log_likelihood",
                scores=tuple(s for s in nll.scores if s.candidate_id in {c.candidate_id for c in group}),
            )
            nll_selections[iid] = select_one(group, sub).candidate_id
        rows.append(
            BackendRow(
                backend_id="NLL",
                select1=select1_accuracy(nll_selections, labels_by_cid, threshold),
                ap=ap_or_none([nll_values[c.candidate_id] for c in split_cands]),
            )
        )

    backend_values = score_set.as_dict()
    if all(c.candidate_id in backend_values for c in split_cands):
        split_selections = {
            iid: cid for iid, cid in selections.items() if iid in split_ids
        }
        rows.append(
            BackendRow(
                backend_id=score_set.backend_id,
                select1=select1_accuracy(split_selections, labels_by_cid, threshold)
                if split_selections
                else None,
                ap=ap_or_none([backend_values[c.candidate_id] for c in split_cands]),
            )
        )

    return MetricsReport(
        experiment=f"{cfg.experiment} [{split}]",
        threshold=threshold,
        n_instances=len(by_instance),
        n_candidates=len(split_cands),
        random_select1=random_s1.mean,
        random_select1_stderr=random_s1.stderr,
        random_ap=random_ap.mean,
        random_ap_stderr=random_ap.stderr,
        constant_ap=constant,
        backends=tuple(rows),
        oracle_select1=oracle,
        oracle_ap=100.0,
        agreement_alpha=alpha,
        extras=dict(extras),
        provenance={
            "backend_id": score_set.backend_id,
            "threshold": threshold,
            "seed": str(cfg.seed),
        },
    )


def stage_evaluate(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Full metric suite per split: baselines, backend rows, oracle, agreement."""
    labels_path = _require(run_dir, "labels.jsonl")
    scores_path = _require(run_dir, "scores.jsonl")
    selections_path = _require(run_dir, "selections.jsonl")
    candidates_path = _require(run_dir, "candidates.jsonl")
    instances_path = _require(run_dir, "instances.jsonl")

    def work():
        instances = load_instances(instances_path)
        candidates = load_candidates(candidates_path)
        labels_by_cid = {lab.candidate_id: lab for lab in load_labels(labels_path)}
        score_set = FilterScoreSet.from_records(read_records(scores_path, "score"))
        selections = {
            r["instance_id"]: r["candidate_id"]
            for r in read_records(selections_path, "selection")
        }
        alpha = None
        judgments_path = run_dir / "judgments.jsonl"
        if judgments_path.exists():
            from explpipe.annotation.agreement import krippendorff_alpha

            judgments = [j for j in load_judgments(judgments_path) if not j.excluded]
            by_subject: dict[str, dict[str, bool]] = {}
            for j in judgments:
                if j.kind == "acceptability":
                    by_subject.setdefault(j.subject_id, {})[j.annotator_id] = j.payload["accept"]
            annotators = sorted({a for row in by_subject.values() for a in row})
            matrix = [
                [row.get(a) for a in annotators] for row in by_subject.values()
            ]
            if len(matrix) >= 2:
                report = krippendorff_alpha(matrix, scale="nominal")
                alpha = report.alpha

        extras: dict[str, float] = {}
        runs_grouped = _group_by_instance(candidates)
        if all(
            any(c.decode == "greedy" for c in group) for group in runs_grouped.values()
        ):
            upsets = 0
            comparable = 0
            for group in runs_grouped.values():
                greedy = next(c for c in group if c.decode == "greedy")
                samples = [c for c in group if c.decode == "sampled"]
                if greedy.token_logprobs and samples:
                    comparable += 1
                    if any(s.total_logprob > greedy.total_logprob for s in samples):
                        upsets += 1
            if comparable:
                extras["sample_beats_greedy_fraction"] = upsets / comparable

        reports = {}
        for split in ("dev", "test", "test2"):
            report = _split_report(
                split, cfg, instances, candidates, labels_by_cid, score_set, selections, alpha, extras
            )
            if report is not None:
                reports[split] = json.loads(report.to_json())
        if not reports:
            raise ValidationFailure("no split has labeled candidates to evaluate")
        (run_dir / "metrics.json").write_text(
            json.dumps({"threshold": cfg.eval.threshold, "splits": reports}, indent=2, sort_keys=True)
        )
        return {"splits": ",".join(sorted(reports))}

    return _stage(
        run_dir,
        "evaluate",
        {"eval": cfg.eval.__dict__, "filter": cfg.filter.__dict__, "seed": cfg.seed},
        {
            "labels.jsonl": labels_path,
            "scores.jsonl": scores_path,
            "selections.jsonl": selections_path,
            "candidates.jsonl": candidates_path,
            "instances.jsonl": instances_path,
        },
        ["metrics.json"],
        force,
        work,
    )


def stage_report(run_dir: Path, cfg: RunConfig, force: bool = False) -> StageResult:
    """Render metrics.json as aligned text tables plus per-item CSV."""
    metrics_path = _require(run_dir, "metrics.json")
    candidates_path = _require(run_dir, "candidates.jsonl")
    labels_path = _require(run_dir, "labels.jsonl")
    scores_path = _require(run_dir, "scores.jsonl")
    selections_path = _require(run_dir, "selections.jsonl")
    instances_path = _require(run_dir, "instances.jsonl")

    def work():
        payload = json.loads(metrics_path.read_text())
        tables = []
        for split in sorted(payload["splits"]):
            raw = dict(payload["splits"][split])
            raw["backends"] = tuple(BackendRow(**b) for b in raw["backends"])
            tables.append(render_table(MetricsReport(**raw)))
        (run_dir / "report.txt").write_text("\n".join(tables))

        instances = {i.id: i for i in load_instances(instances_path)}
        labels_by_cid = {lab.candidate_id: lab for lab in load_labels(labels_path)}
        values = {r["candidate_id"]: r["value"] for r in read_records(scores_path, "score")}
        selections = {
            r["instance_id"]: r["candidate_id"]
            for r in read_records(selections_path, "selection")
        }
        rows = []
        for c in load_candidates(candidates_path):
            lab = labels_by_cid.get(c.candidate_id)
            rows.append(
                {
                    "instance_id": c.instance_id,
                    "split": instances[c.instance_id].split.value,
                    "candidate_id": c.candidate_id,
                    "decode": c.decode,
                    "n_accept": lab.n_accept if lab else "",
                    "positive_3of3": lab.label_3of3 if lab else "",
                    "positive_2of3": lab.label_2of3 if lab else "",
                    "score": values.get(c.candidate_id, ""),
                    "selected": selections.get(c.instance_id) == c.candidate_id,
                }
            )
        (run_dir / "per_item.csv").write_text(per_item_csv(rows))
        return {"tables": len(tables), "rows": len(rows)}

    return _stage(
        run_dir,
        "report",
        {"eval": cfg.eval.__dict__},
        {"metrics.json": metrics_path},
        ["report.txt", "per_item.csv"],
        force,
        work,
    )


PIPELINE_ORDER = [
    ("validate", stage_validate),
    ("prompts", stage_prompts),
    ("generate", stage_generate),
    ("annotate-synthetic", stage_annotate_synthetic),
    ("aggregate", stage_aggregate),
    ("build-labels", stage_build_labels),
    ("train-filter", stage_train_filter),
    ("score", stage_score),
    ("select", stage_select),
    ("evaluate", stage_evaluate),
    ("report", stage_report),
]


def run_pipeline(run_dir: Path, cfg: RunConfig, force: bool = False) -> list[StageResult]:
    """Every stage in order: the end-to-end desk-scale pipeline."""
    results = []
    for name, fn in PIPELINE_ORDER:
        if name == "train-filter" and cfg.filter.backend != "builtin":
            continue
        results.append(fn(run_dir, cfg, force))
    return results
