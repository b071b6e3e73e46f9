"""Nonparametric statistics: Spearman correlation with a seeded permutation
test, the one-sided Wilcoxon signed-rank test, and head-to-head preference
tallies.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from explpipe.core.types import Judgment
from explpipe.metrics.ranking import UndefinedMetricError


def midranks(values: Sequence[float]) -> np.ndarray:
    """Ranks 1..n with tied values receiving the mean of their rank range."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j < len(arr) and arr[order[j]] == arr[order[i]]:
            j += 1
        # ranks i+1 .. j averaged over the tie block
        ranks[order[i:j]] = (i + 1 + j) / 2.0
        i = j
    return ranks


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_two_sided: float
    n: int
    n_permutations: int
    seed: int


def spearman_rho(
    x: Sequence[float],
    y: Sequence[float],
    n_permutations: int = 10_000,
    seed: int = 0,
) -> SpearmanResult:
    """Spearman rank correlation with a seeded permutation p-value.

    Ranks use midranks for ties; rho is the Pearson correlation of the rank
    vectors. The two-sided p-value counts permutations of y whose |rho|
    reaches the observed |rho|, with add-one smoothing.
    """
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    if len(x) < 3:
        raise UndefinedMetricError("need at least 3 pairs")
    rx = midranks(x)
    ry = midranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetricError("zero variance: correlation undefined")
    denom = math.sqrt(sxx * syy)
    rho = float(np.dot(dx, dy)) / denom

    rng = np.random.default_rng(seed)
    observed = abs(rho)
    hits = 0
    for _ in range(n_permutations):
        perm = rng.permutation(dy)
        if abs(float(np.dot(dx, perm)) / denom) >= observed:
            hits += 1
    p = (hits + 1) / (n_permutations + 1)
    return SpearmanResult(rho=rho, p_two_sided=p, n=len(x), n_permutations=n_permutations, seed=seed)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W+: rank sum of positive differences
    p: float
    n_nonzero: int
    method: str  # "exact" | "normal"


def wilcoxon_signed_rank_one_sided(
    a: Sequence[float],
    b: Sequence[float],
    exact_max_n: int = 25,
) -> WilcoxonResult:
    """One-sided Wilcoxon signed-rank test of the alternative "a > b".

    Zero differences are dropped; ties on |difference| get midranks. The
    null distribution of the positive rank sum is exact (all 2^n sign
    assignments, via convolution) up to ``exact_max_n`` non-zero pairs and
    a tie-corrected normal approximation beyond.
    """
    if len(a) != len(b):
        raise ValueError("paired samples differ in length")
    diffs = [ai - bi for ai, bi in zip(a, b) if ai - bi != 0.0]
    n = len(diffs)
    if n < 5:
        raise UndefinedMetricError(f"need >= 5 non-zero differences, got {n}")

    ranks = midranks([abs(d) for d in diffs])
    w_plus = float(sum(r for r, d in zip(ranks, diffs) if d > 0))

    if n <= exact_max_n:
        # Distribution of W+ over all sign patterns. Doubling the ranks makes
        # midranks integral so the convolution stays in exact integer land.
        ranks2 = [round(2 * r) for r in ranks]
        total = sum(ranks2)
        counts = [0] * (total + 1)
        counts[0] = 1
        for r2 in ranks2:
            for s in range(total - r2, -1, -1):
                if counts[s]:
                    counts[s + r2] += counts[s]
        w2 = round(2 * w_plus)
        tail = sum(counts[w2:])
        p = tail / (1 << n)
        return WilcoxonResult(statistic=w_plus, p=p, n_nonzero=n, method="exact")

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    tie_sizes = Counter(abs(d) for d in diffs).values()
    var -= sum(t**3 - t for t in tie_sizes) / 48.0
    z = (w_plus - mean) / math.sqrt(var)
    p = 0.5 * math.erfc(z / math.sqrt(2))  # upper tail
    return WilcoxonResult(statistic=w_plus, p=p, n_nonzero=n, method="normal")


@dataclass(frozen=True)
class HeadToHeadTally:
    source_a: str
    source_b: str
    per_annotation: Mapping[str, float]  # source tag / "tie" -> percent
    per_item_majority: Mapping[str, float]
    n_items: int
    n_responses: int
    n_excluded_items: int


def head_to_head_tally(
    judgments: Sequence[Judgment],
    expected_per_item: int = 3,
) -> HeadToHeadTally:
    """Preference percentages over all responses, plus a per-item majority view.

    The primary view counts every response once (left/right mapped back to
    the hidden source tags, ties kept as ties). The majority view labels an
    item with a source when at least 2 of its responses agree, and as a tie
    otherwise. Items with fewer than ``expected_per_item`` responses are
    excluded and counted.
    """
    by_item: dict[str, list[Judgment]] = defaultdict(list)
    for j in judgments:
        if j.kind != "head_to_head":
            raise ValueError(f"judgment {j.judgment_id} is not head_to_head")
        by_item[j.subject_id].append(j)

    sources: set[str] = set()
    for js in by_item.values():
        for j in js:
            sources.add(j.payload["left_source"])
            sources.add(j.payload["right_source"])
    if len(sources) != 2:
        raise ValueError(f"expected exactly 2 source tags, found {sorted(sources)}")
    source_a, source_b = sorted(sources)

    response_counts: Counter[str] = Counter()
    majority_counts: Counter[str] = Counter()
    n_items = 0
    n_responses = 0
    n_excluded = 0
    for item_id, js in sorted(by_item.items()):
        if len(js) < expected_per_item:
            n_excluded += 1
            continue
        item_votes: Counter[str] = Counter()
        for j in js:
            choice = j.payload["choice"]
            if choice == "tie":
                winner = "tie"
            elif choice == "left":
                winner = j.payload["left_source"]
            elif choice == "right":
                winner = j.payload["right_source"]
            else:
                raise ValueError(f"judgment {j.judgment_id}: bad choice {choice!r}")
            item_votes[winner] += 1
            response_counts[winner] += 1
            n_responses += 1
        top, top_count = item_votes.most_common(1)[0]
        majority_counts[top if top_count >= 2 else "tie"] += 1
        n_items += 1

    if n_items == 0:
        raise UndefinedMetricError("no complete head-to-head items")

    keys = (source_a, "tie", source_b)
    per_annotation = {k: 100.0 * response_counts[k] / n_responses for k in keys}
    per_item = {k: 100.0 * majority_counts[k] / n_items for k in keys}
    return HeadToHeadTally(
        source_a=source_a,
        source_b=source_b,
        per_annotation=per_annotation,
        per_item_majority=per_item,
        n_items=n_items,
        n_responses=n_responses,
        n_excluded_items=n_excluded,
    )
