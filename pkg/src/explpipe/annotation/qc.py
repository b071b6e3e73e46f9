"""Annotator quality control: page-time floors and leave-one-out agreement.

An annotator is flagged when their median page time falls below a floor or
when removing their responses raises Krippendorff's alpha by more than a
configured delta. Flagged annotators' judgments are excluded (not deleted)
and their pages reopen for re-annotation.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Optional

from explpipe.annotation.agreement import krippendorff_alpha
from explpipe.annotation.studies import StudyStore

DEFAULT_TIME_FLOOR_MS = 5000
DEFAULT_ALPHA_DELTA = 0.05


@dataclass(frozen=True)
class AnnotatorReport:
    annotator_id: str
    n_judgments: int
    median_elapsed_ms: float
    leave_one_out_alpha_delta: Optional[float]
    flagged: bool
    reasons: tuple[str, ...]


def _alpha_of(rows, scale: str) -> Optional[float]:
    try:
        return krippendorff_alpha(rows, scale=scale).alpha
    except ValueError:
        return None


def annotator_qc(
    store: StudyStore,
    study_id: str,
    time_floor_ms: int = DEFAULT_TIME_FLOOR_MS,
    alpha_delta: float = DEFAULT_ALPHA_DELTA,
) -> list[AnnotatorReport]:
    """Per-annotator report over a (complete) study."""
    study = store.studies[study_id]
    scale = "interval" if study.judgment_kind == "absolute" else "nominal"
    rows, annotators = store.agreement_matrix(study_id)
    base_alpha = _alpha_of(rows, scale)

    col = {a: i for i, a in enumerate(annotators)}
    reports = []
    for annotator in annotators:
        js = [j for j in store.active_judgments(study_id) if j.annotator_id == annotator]
        median_ms = statistics.median(j.elapsed_ms for j in js)

        without = [
            [v for i, v in enumerate(row) if i != col[annotator]] for row in rows
        ]
        without = [row for row in without if sum(v is not None for v in row) >= 2]
        delta: Optional[float] = None
        if base_alpha is not None and len(without) >= 2:
            alpha_without = _alpha_of(without, scale)
            if alpha_without is not None:
                delta = alpha_without - base_alpha

        reasons = []
        if median_ms < time_floor_ms:
            reasons.append(f"median page time {median_ms:.0f}ms below floor {time_floor_ms}ms")
        if delta is not None and delta > alpha_delta:
            reasons.append(
                f"removal raises alpha by {delta:.3f} (> {alpha_delta})"
            )
        reports.append(
            AnnotatorReport(
                annotator_id=annotator,
                n_judgments=len(js),
                median_elapsed_ms=median_ms,
                leave_one_out_alpha_delta=delta,
                flagged=bool(reasons),
                reasons=tuple(reasons),
            )
        )
    return reports


def apply_qc(store: StudyStore, study_id: str, reports: list[AnnotatorReport]) -> dict[str, int]:
    """Exclude every flagged annotator's judgments and reopen their pages."""
    excluded = {}
    for report in reports:
        if report.flagged:
            excluded[report.annotator_id] = store.exclude_annotator(
                study_id, report.annotator_id
            )
    return excluded
