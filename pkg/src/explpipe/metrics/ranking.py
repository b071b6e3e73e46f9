"""Selection and ranking metrics: select-1 accuracy, average precision,
and the random / constant / oracle reference rows.

All metrics return percentages. Candidates tied on score are treated as a
single block when walking the precision-recall curve, so a constant scorer
gets exactly the positive prevalence and the metric never depends on how a
sort implementation breaks ties. With distinct scores this reduces to the
classic mean-of-precision-at-each-positive definition.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from explpipe.core.types import AggregatedLabel

THRESHOLDS = ("3of3", "2of3")


class UndefinedMetricError(ValueError):
    """The metric has no defined value on this input (e.g. zero positives)."""


def _check_threshold(threshold: str) -> None:
    if threshold not in THRESHOLDS:
        raise ValueError(f"threshold must be one of {THRESHOLDS}, got {threshold!r}")


def select1_accuracy(
    selections: Mapping[str, str],
    labels: Mapping[str, AggregatedLabel],
    threshold: str = "3of3",
) -> float:
    """Percent of instances whose selected candidate is positive at the threshold.

    ``selections`` maps instance_id -> selected candidate_id; ``labels`` maps
    candidate_id -> AggregatedLabel.
    """
    _check_threshold(threshold)
    if not selections:
        raise UndefinedMetricError("no selections")
    hits = 0
    for instance_id, candidate_id in selections.items():
        if candidate_id not in labels:
            raise KeyError(f"instance {instance_id}: no label for selection {candidate_id}")
        if labels[candidate_id].positive(threshold):
            hits += 1
    return 100.0 * hits / len(selections)


def average_precision(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Average precision as a percent, over all candidates ranked by score.

    Computed as sum over score thresholds of (recall step) x (precision at
    the threshold): equal scores enter as one block. Equivalent to the mean
    over positives of precision at each positive's rank when scores are
    distinct, and exactly the positive prevalence for a constant scorer.
    """
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    n_pos = sum(bool(l) for l in labels)
    if n_pos == 0:
        raise UndefinedMetricError("average precision undefined: zero positive labels")

    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    weighted = 0.0  # sum over blocks of block_tp * precision-at-block
    tp = 0
    seen = 0
    i = 0
    while i < len(order):
        j = i
        block_tp = 0
        while j < len(order) and scores[order[j]] == scores[order[i]]:
            block_tp += bool(labels[order[j]])
            j += 1
        seen += j - i
        if block_tp:
            tp += block_tp
            weighted += block_tp * (tp / seen)
        i = j
    return 100.0 * weighted / n_pos


def average_precision_tie_range(
    scores: Sequence[float], labels: Sequence[bool]
) -> tuple[float, float]:
    """(pessimistic, optimistic) AP pair for tie diagnostics.

    Pessimistic ranks negatives before positives inside each tied block,
    optimistic the reverse; both collapse to ``average_precision`` when the
    scores are distinct.
    """
    eps = 0.25 / (len(scores) + 1)
    pess = [s - eps * bool(l) for s, l in zip(scores, labels)]
    opt = [s + eps * bool(l) for s, l in zip(scores, labels)]
    return average_precision(pess, labels), average_precision(opt, labels)


def constant_baseline(labels: Sequence[AggregatedLabel], threshold: str = "3of3") -> float:
    """AP of a constant scorer: the percent prevalence of positive labels."""
    _check_threshold(threshold)
    if not labels:
        raise UndefinedMetricError("no labels")
    n_pos = sum(lab.positive(threshold) for lab in labels)
    return 100.0 * n_pos / len(labels)


def oracle_select1(
    labels_by_instance: Mapping[str, Sequence[AggregatedLabel]],
    threshold: str = "3of3",
) -> float:
    """Percent of instances with at least one positive candidate.

    The ceiling for any select-1 system; the explanation-level oracle is
    always 100.
    """
    _check_threshold(threshold)
    if not labels_by_instance:
        raise UndefinedMetricError("no instances")
    hits = sum(
        any(lab.positive(threshold) for lab in labs)
        for labs in labels_by_instance.values()
    )
    return 100.0 * hits / len(labels_by_instance)


@dataclass(frozen=True)
class TrialStat:
    mean: float
    stderr: float
    n_trials: int


def _mean_stderr(values: Sequence[float]) -> TrialStat:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return TrialStat(mean, 0.0, n)
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return TrialStat(mean, (var / n) ** 0.5, n)


def random_baseline_select1(
    labels_by_instance: Mapping[str, Sequence[AggregatedLabel]],
    threshold: str = "3of3",
    n_trials: int = 5,
    seed: int = 0,
) -> TrialStat:
    """Mean and standard error of a uniform-random selector over seeded trials."""
    _check_threshold(threshold)
    if n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    instances = sorted(labels_by_instance)
    accs = []
    for trial in range(n_trials):
        rng = random.Random(f"{seed}:select1:{trial}")
        hits = sum(
            rng.choice(labels_by_instance[iid]).positive(threshold) for iid in instances
        )
        accs.append(100.0 * hits / len(instances))
    return _mean_stderr(accs)


def random_baseline_ap(
    labels: Sequence[AggregatedLabel],
    threshold: str = "3of3",
    n_trials: int = 5,
    seed: int = 0,
) -> TrialStat:
    """Mean and standard error of AP under uniform-random scores, seeded per trial."""
    _check_threshold(threshold)
    if n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    flags = [lab.positive(threshold) for lab in labels]
    aps = []
    for trial in range(n_trials):
        rng = random.Random(f"{seed}:ap:{trial}")
        scores = [rng.random() for _ in labels]
        aps.append(average_precision(scores, flags))
    return _mean_stderr(aps)


def exact_random_select1_expectation(
    labels_by_instance: Mapping[str, Sequence[AggregatedLabel]],
    threshold: str = "3of3",
) -> float:
    """Closed-form expectation of the random select-1 baseline (test oracle aid)."""
    _check_threshold(threshold)
    total = 0.0
    for labs in labels_by_instance.values():
        total += sum(lab.positive(threshold) for lab in labs) / len(labs)
    return 100.0 * total / len(labels_by_instance)
