"""Study scheduling, lease-based assignment, judgment recording, and
aggregation for the three human studies plus qualification exams.

Items are grouped into pages (5 per page for acceptability, 1 otherwise);
each page must be completed by ``raters_per_item`` distinct raters and a
rater never sees the same item twice. Checkout is claim-with-lease under a
single lock so concurrent raters cannot receive the same pending assignment.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

from explpipe.core.jsonl import append_record, read_records, write_records
from explpipe.core.types import AggregatedLabel, Judgment, content_id
from explpipe.annotation.agreement import AgreementReport, krippendorff_alpha
from explpipe.annotation.payloads import (
    encode_absolute_scores,
    validate_payload,
)

STUDY_KINDS = ("acceptability", "head_to_head", "absolute", "qualification")

# fields a rater must never receive: candidate provenance, exam keys, and
# non-gold answer choices (raters see only the gold label)
HIDDEN_ITEM_FIELDS = (
    "source",
    "source_a",
    "source_b",
    "provenance",
    "answer_key",
    "decode",
    "choices",
)

DEFAULT_LEASE_SECONDS = 600.0


class AssignmentError(Exception):
    """No open assignment backs this submission."""


class DuplicateJudgmentError(Exception):
    def __init__(self, annotator_id: str, subject_id: str, kind: str):
        super().__init__(
            f"annotator {annotator_id} already judged {subject_id} ({kind})"
        )


class QualificationError(Exception):
    """The annotator does not hold the qualification this study requires."""


class IncompleteItemError(Exception):
    def __init__(self, subject_id: str, have: int, need: int):
        super().__init__(f"item {subject_id}: {have} of {need} judgments recorded")
        self.subject_id = subject_id


@dataclass(frozen=True)
class StudyItem:
    item_id: str
    content: Mapping[str, Any]  # full server-side content, incl. hidden fields


@dataclass(frozen=True)
class Page:
    page_id: str
    item_ids: tuple[str, ...]


@dataclass
class Study:
    study_id: str
    kind: str
    flow_mode: str
    raters_per_item: int
    batch_size: int
    items: dict[str, StudyItem]
    pages: list[Page]
    requires_qualification: Optional[str] = None  # qualification study id
    pass_score: Optional[float] = None  # qualification studies only
    created_at: str = ""

    @property
    def judgment_kind(self) -> str:
        # exam pages reuse the absolute question format
        return "absolute" if self.kind == "qualification" else self.kind

    def to_record(self) -> dict[str, Any]:
        return {
            "study_id": self.study_id,
            "kind": self.kind,
            "flow_mode": self.flow_mode,
            "raters_per_item": self.raters_per_item,
            "batch_size": self.batch_size,
            "items": [
                {"item_id": it.item_id, "content": dict(it.content)}
                for it in self.items.values()
            ],
            "pages": [{"page_id": p.page_id, "item_ids": list(p.item_ids)} for p in self.pages],
            "requires_qualification": self.requires_qualification,
            "pass_score": self.pass_score,
            "created_at": self.created_at,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "Study":
        items = {
            it["item_id"]: StudyItem(it["item_id"], it["content"]) for it in rec["items"]
        }
        return cls(
            study_id=rec["study_id"],
            kind=rec["kind"],
            flow_mode=rec["flow_mode"],
            raters_per_item=rec["raters_per_item"],
            batch_size=rec["batch_size"],
            items=items,
            pages=[Page(p["page_id"], tuple(p["item_ids"])) for p in rec["pages"]],
            requires_qualification=rec.get("requires_qualification"),
            pass_score=rec.get("pass_score"),
            created_at=rec.get("created_at", ""),
        )


@dataclass
class Lease:
    study_id: str
    page_id: str
    annotator_id: str
    expires_at: float


def _iso_from_epoch(epoch_seconds: float) -> str:
    return datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


class StudyStore:
    """In-memory study state with optional JSON Lines write-through.

    Immutable judgments accumulate in ``judgments.jsonl``; study definitions
    and qualification grants snapshot to their own files. All mutation runs
    under one lock; aggregation reads only committed judgments.
    """

    def __init__(
        self,
        root_dir: Optional[str | Path] = None,
        clock: Callable[[], float] = time.time,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
    ):
        self.root_dir = Path(root_dir) if root_dir is not None else None
        self.clock = clock
        self.lease_seconds = lease_seconds
        self._lock = threading.Lock()
        self.studies: dict[str, Study] = {}
        self.judgments: list[Judgment] = []
        self._judgment_keys: set[tuple[str, str, str]] = set()
        self._submitted: dict[tuple[str, str], set[str]] = {}  # (study, page) -> annotators
        self._leases: dict[tuple[str, str, str], Lease] = {}
        self.qualifications: dict[tuple[str, str], dict[str, Any]] = {}  # (annotator, exam id)
        self._removed: dict[str, set[str]] = {}  # study -> annotators pulled by QC

    # ----- persistence -------------------------------------------------

    @classmethod
    def open(cls, root_dir: str | Path, **kwargs) -> "StudyStore":
        store = cls(root_dir=root_dir, **kwargs)
        root = Path(root_dir)
        studies_path = root / "studies.jsonl"
        if studies_path.exists():
            for rec in read_records(studies_path, "study"):
                study = Study.from_record(rec)
                store.studies[study.study_id] = study
        judgments_path = root / "judgments.jsonl"
        if judgments_path.exists():
            for rec in read_records(judgments_path, "judgment"):
                j = Judgment.from_record(rec)
                store.judgments.append(j)
                store._judgment_keys.add(j.key())
        quals_path = root / "qualifications.jsonl"
        if quals_path.exists():
            for rec in read_records(quals_path, "qualification"):
                store.qualifications[(rec["annotator_id"], rec["exam_id"])] = rec
        store._rebuild_submissions()
        return store

    def _rebuild_submissions(self) -> None:
        for j in self.judgments:
            study = self.studies.get(j.study_id)
            if study is None:
                continue
            for page in study.pages:
                if j.subject_id in page.item_ids:
                    done = {
                        jj.annotator_id
                        for jj in self.judgments
                        if jj.study_id == study.study_id
                        and jj.subject_id in page.item_ids
                        and not jj.excluded
                    }
                    complete = {
                        a
                        for a in done
                        if all(
                            (a, iid, study.judgment_kind) in self._judgment_keys
                            for iid in page.item_ids
                        )
                    }
                    self._submitted[(study.study_id, page.page_id)] = complete
                    break

    def _persist_studies(self) -> None:
        if self.root_dir is None:
            return
        write_records(
            self.root_dir / "studies.jsonl",
            "study",
            (s.to_record() for s in self.studies.values()),
        )

    def _persist_judgment(self, j: Judgment) -> None:
        if self.root_dir is None:
            return
        append_record(self.root_dir / "judgments.jsonl", "judgment", j.to_record())

    def _persist_all_judgments(self) -> None:
        if self.root_dir is None:
            return
        write_records(
            self.root_dir / "judgments.jsonl",
            "judgment",
            (j.to_record() for j in self.judgments),
        )

    def _persist_qualifications(self) -> None:
        if self.root_dir is None:
            return
        write_records(
            self.root_dir / "qualifications.jsonl",
            "qualification",
            self.qualifications.values(),
        )

    # ----- study creation ----------------------------------------------

    def create_study(
        self,
        kind: str,
        items: Sequence[Mapping[str, Any]],
        raters_per_item: int = 3,
        batch_size: Optional[int] = None,
        flow_mode: str = "mcqa",
        study_id: Optional[str] = None,
        requires_qualification: Optional[str] = None,
        pass_score: Optional[float] = None,
    ) -> Study:
        """Schedule ``items`` (each a mapping with an ``item_id``) for exactly
        ``raters_per_item`` distinct raters, grouped into pages.

        Whether enough distinct raters exist is only known at close-out;
        creation never fails for that reason.
        """
        if kind not in STUDY_KINDS:
            raise ValueError(f"study kind must be one of {STUDY_KINDS}")
        if not items:
            raise ValueError("study needs at least one item")
        if batch_size is None:
            batch_size = 5 if kind == "acceptability" else 1
        with self._lock:
            sid = study_id or f"study-{content_id(kind, str(len(self.studies)), str(self.clock()))}"
            if sid in self.studies:
                raise ValueError(f"study {sid} already exists")
            study_items: dict[str, StudyItem] = {}
            for item in items:
                iid = item["item_id"]
                if iid in study_items:
                    raise ValueError(f"duplicate item {iid}")
                content = {k: v for k, v in item.items() if k != "item_id"}
                study_items[iid] = StudyItem(item_id=iid, content=content)
            ids = list(study_items)
            pages = [
                Page(page_id=f"{sid}-p{i // batch_size:04d}", item_ids=tuple(ids[i : i + batch_size]))
                for i in range(0, len(ids), batch_size)
            ]
            study = Study(
                study_id=sid,
                kind=kind,
                flow_mode=flow_mode,
                raters_per_item=raters_per_item,
                batch_size=batch_size,
                items=study_items,
                pages=pages,
                requires_qualification=requires_qualification,
                pass_score=pass_score,
                created_at=_iso_from_epoch(self.clock()),
            )
            self.studies[sid] = study
            for page in pages:
                self._submitted.setdefault((sid, page.page_id), set())
            self._persist_studies()
            return study

    # ----- assignment --------------------------------------------------

    def _active_leases(self, study_id: str, page_id: str, now: float) -> list[Lease]:
        out = []
        for lease in list(self._leases.values()):
            if lease.expires_at <= now:
                del self._leases[(lease.study_id, lease.page_id, lease.annotator_id)]
                continue
            if lease.study_id == study_id and lease.page_id == page_id:
                out.append(lease)
        return out

    def _check_qualified(self, study: Study, annotator_id: str) -> None:
        if annotator_id in self._removed.get(study.study_id, set()):
            raise QualificationError(
                f"annotator {annotator_id} was removed from study {study.study_id} by quality control"
            )
        exam = study.requires_qualification
        if exam is None:
            return
        grant = self.qualifications.get((annotator_id, exam))
        if not grant or not grant.get("passed"):
            raise QualificationError(
                f"annotator {annotator_id} lacks qualification {exam}"
            )

    def claim_next(self, study_id: str, annotator_id: str) -> Optional[Page]:
        """Atomically lease the next page this annotator may work on.

        Re-serves the annotator's own active lease first (a mid-page refresh
        gets the same assignment back). Returns None when nothing is pending.
        """
        with self._lock:
            study = self.studies[study_id]
            self._check_qualified(study, annotator_id)
            now = self.clock()
            for page in study.pages:
                lease = self._leases.get((study_id, page.page_id, annotator_id))
                if lease and lease.expires_at > now:
                    lease.expires_at = now + self.lease_seconds
                    return page
            for page in study.pages:
                submitted = self._submitted[(study_id, page.page_id)]
                if annotator_id in submitted:
                    continue
                active = self._active_leases(study_id, page.page_id, now)
                if any(l.annotator_id == annotator_id for l in active):
                    continue  # unreachable after the re-serve loop, kept for safety
                # qualification exams admit any number of raters, each once
                if (
                    study.kind != "qualification"
                    and len(submitted) + len(active) >= study.raters_per_item
                ):
                    continue
                self._leases[(study_id, page.page_id, annotator_id)] = Lease(
                    study_id=study_id,
                    page_id=page.page_id,
                    annotator_id=annotator_id,
                    expires_at=now + self.lease_seconds,
                )
                return page
            return None

    def head_to_head_orientation(self, study_id: str, item_id: str, annotator_id: str) -> bool:
        """True when sources a/b are shown right/left (swapped) for this rater."""
        rng = random.Random(f"{study_id}:{item_id}:{annotator_id}:orient")
        return rng.random() < 0.5

    def rater_view(self, study: Study, page: Page, annotator_id: str) -> list[dict[str, Any]]:
        """Page items as delivered to a rater: provenance stripped, head-to-head
        pairs pre-randomized into left/right."""
        out = []
        for iid in page.item_ids:
            item = study.items[iid]
            visible = {
                k: v for k, v in item.content.items() if k not in HIDDEN_ITEM_FIELDS
            }
            visible["item_id"] = iid
            if study.kind == "head_to_head":
                swapped = self.head_to_head_orientation(study.study_id, iid, annotator_id)
                a_text = item.content["text_a"]
                b_text = item.content["text_b"]
                visible.pop("text_a", None)
                visible.pop("text_b", None)
                visible["left_text"] = b_text if swapped else a_text
                visible["right_text"] = a_text if swapped else b_text
            out.append(visible)
        return out

    # ----- judgments ----------------------------------------------------

    def record_judgment(
        self,
        annotator_id: str,
        subject_id: str,
        kind: str,
        payload: Mapping[str, Any],
        elapsed_ms: int,
        study_id: str,
    ) -> Judgment:
        """Validate and store one response against an open assignment."""
        with self._lock:
            return self._record_judgment_locked(
                annotator_id, subject_id, kind, payload, elapsed_ms, study_id
            )

    def _record_judgment_locked(
        self, annotator_id, subject_id, kind, payload, elapsed_ms, study_id
    ) -> Judgment:
        study = self.studies[study_id]
        self._check_qualified(study, annotator_id)
        if kind != study.judgment_kind:
            raise ValueError(
                f"study {study_id} records {study.judgment_kind} judgments, not {kind}"
            )
        if subject_id not in study.items:
            raise AssignmentError(f"item {subject_id} is not part of study {study_id}")
        page = next(p for p in study.pages if subject_id in p.item_ids)
        now = self.clock()
        lease = self._leases.get((study_id, page.page_id, annotator_id))
        if lease is None or lease.expires_at <= now:
            raise AssignmentError(
                f"annotator {annotator_id} holds no open assignment for page {page.page_id}"
            )
        if (annotator_id, subject_id, kind) in self._judgment_keys:
            raise DuplicateJudgmentError(annotator_id, subject_id, kind)
        clean = validate_payload(kind, payload, study.flow_mode)
        judgment = Judgment(
            judgment_id=f"j-{content_id(study_id, subject_id, annotator_id, kind)}",
            annotator_id=annotator_id,
            subject_id=subject_id,
            kind=kind,
            payload=clean,
            elapsed_ms=elapsed_ms,
            created_at=_iso_from_epoch(self.clock()),
            study_id=study_id,
        )
        self.judgments.append(judgment)
        self._judgment_keys.add(judgment.key())
        self._persist_judgment(judgment)
        # page complete for this annotator -> release the lease
        if all(
            (annotator_id, iid, kind) in self._judgment_keys for iid in page.item_ids
        ):
            self._submitted[(study_id, page.page_id)].add(annotator_id)
            self._leases.pop((study_id, page.page_id, annotator_id), None)
            if study.kind == "qualification":
                self._maybe_grade_qualification(study, annotator_id)
        return judgment

    def submit_page(
        self,
        study_id: str,
        page_id: str,
        annotator_id: str,
        responses: Sequence[tuple[str, Mapping[str, Any]]],
        elapsed_ms: int,
    ) -> list[Judgment]:
        """Record a full page of responses sharing one elapsed time."""
        with self._lock:
            study = self.studies[study_id]
            page = next((p for p in study.pages if p.page_id == page_id), None)
            if page is None:
                raise AssignmentError(f"no page {page_id} in study {study_id}")
            answered = {item_id for item_id, _ in responses}
            if answered != set(page.item_ids):
                raise AssignmentError(
                    f"page {page_id} needs answers for all of {sorted(page.item_ids)}"
                )
            out = []
            for item_id, payload in responses:
                payload = dict(payload)
                if study.kind == "head_to_head":
                    swapped = self.head_to_head_orientation(study_id, item_id, annotator_id)
                    item = study.items[item_id]
                    left_key, right_key = ("source_b", "source_a") if swapped else ("source_a", "source_b")
                    payload.setdefault("left_source", item.content[left_key])
                    payload.setdefault("right_source", item.content[right_key])
                out.append(
                    self._record_judgment_locked(
                        annotator_id,
                        item_id,
                        study.judgment_kind,
                        payload,
                        elapsed_ms,
                        study_id,
                    )
                )
            return out

    # ----- qualification -------------------------------------------------

    def _maybe_grade_qualification(self, study: Study, annotator_id: str) -> None:
        if not all(
            annotator_id in self._submitted[(study.study_id, p.page_id)]
            for p in study.pages
        ):
            return
        score = self.grade_qualification(study.study_id, annotator_id)
        passed = study.pass_score is not None and score >= study.pass_score
        self.qualifications[(annotator_id, study.study_id)] = {
            "annotator_id": annotator_id,
            "exam_id": study.study_id,
            "score": score,
            "passed": passed,
        }
        self._persist_qualifications()

    def grade_qualification(self, study_id: str, annotator_id: str) -> float:
        """Count exam answers matching the per-item answer key."""
        study = self.studies[study_id]
        score = 0.0
        for j in self.judgments:
            if j.study_id != study_id or j.annotator_id != annotator_id or j.excluded:
                continue
            key = study.items[j.subject_id].content.get("answer_key", {})
            for field_name, expected in key.items():
                if j.payload.get(field_name) == expected:
                    score += 1.0
        return score

    def set_qualification(self, annotator_id: str, exam_id: str, score: float, passed: bool) -> None:
        with self._lock:
            self.qualifications[(annotator_id, exam_id)] = {
                "annotator_id": annotator_id,
                "exam_id": exam_id,
                "score": score,
                "passed": passed,
            }
            self._persist_qualifications()

    def is_qualified(self, annotator_id: str, exam_id: str) -> bool:
        grant = self.qualifications.get((annotator_id, exam_id))
        return bool(grant and grant.get("passed"))

    # ----- quality control hooks ----------------------------------------

    def active_judgments(self, study_id: str) -> list[Judgment]:
        return [j for j in self.judgments if j.study_id == study_id and not j.excluded]

    def exclude_annotator(self, study_id: str, annotator_id: str) -> int:
        """Pull an annotator's judgments from aggregation and reopen their pages.

        The original judgments stay on disk, marked excluded; the pages they
        covered become claimable again by other raters.
        """
        with self._lock:
            study = self.studies[study_id]
            n = 0
            for i, j in enumerate(self.judgments):
                if j.study_id == study_id and j.annotator_id == annotator_id and not j.excluded:
                    self.judgments[i] = Judgment(
                        judgment_id=j.judgment_id,
                        annotator_id=j.annotator_id,
                        subject_id=j.subject_id,
                        kind=j.kind,
                        payload=j.payload,
                        elapsed_ms=j.elapsed_ms,
                        created_at=j.created_at,
                        study_id=j.study_id,
                        excluded=True,
                    )
                    n += 1
            for page in study.pages:
                self._submitted[(study_id, page.page_id)].discard(annotator_id)
            self._removed.setdefault(study_id, set()).add(annotator_id)
            if n:
                self._persist_all_judgments()
            return n

    # ----- aggregation ----------------------------------------------------

    def progress(self, study_id: str) -> dict[str, Any]:
        study = self.studies[study_id]
        now = self.clock()
        total = len(study.pages) * study.raters_per_item
        done = sum(
            len(self._submitted[(study_id, p.page_id)]) for p in study.pages
        )
        with self._lock:
            leased = sum(
                len(self._active_leases(study_id, p.page_id, now)) for p in study.pages
            )
        distinct = {
            j.annotator_id for j in self.judgments if j.study_id == study_id and not j.excluded
        }
        return {
            "study_id": study_id,
            "pages": len(study.pages),
            "items": len(study.items),
            "assignments_total": total,
            "assignments_completed": done,
            "assignments_leased": leased,
            "assignments_pending": total - done - leased,
            "distinct_annotators": len(distinct),
        }

    def aggregate_acceptability(self, candidate_id: str, study_id: Optional[str] = None) -> AggregatedLabel:
        """Consensus for one candidate; errors until all raters responded."""
        js = [
            j
            for j in self.judgments
            if j.subject_id == candidate_id
            and j.kind == "acceptability"
            and not j.excluded
            and (study_id is None or j.study_id == study_id)
        ]
        need = 3
        if study_id is not None:
            need = self.studies[study_id].raters_per_item
        elif js:
            study = self.studies.get(js[0].study_id)
            if study:
                need = study.raters_per_item
        if len(js) != need:
            raise IncompleteItemError(candidate_id, len(js), need)
        return aggregate_acceptability_judgments(candidate_id, js)

    def aggregate_all(self, study_id: str) -> tuple[list[AggregatedLabel], int]:
        """Labels for every complete item; returns (labels, n_incomplete)."""
        study = self.studies[study_id]
        labels = []
        incomplete = 0
        for item_id in study.items:
            try:
                labels.append(self.aggregate_acceptability(item_id, study_id))
            except IncompleteItemError:
                incomplete += 1
        return labels, incomplete

    def agreement_matrix(self, study_id: str) -> tuple[list[list], list[str]]:
        """(items x annotators value matrix, annotator ids) for agreement stats.

        Acceptability codes accept yes/no; head-to-head codes the winning
        source tag; absolute expands each attribute into its own row, per the
        aggregate-agreement convention.
        """
        study = self.studies[study_id]
        js = self.active_judgments(study_id)
        annotators = sorted({j.annotator_id for j in js})
        col = {a: i for i, a in enumerate(annotators)}
        kind = study.judgment_kind

        if kind in ("acceptability", "head_to_head"):
            rows = []
            for item_id in study.items:
                row: list = [None] * len(annotators)
                for j in js:
                    if j.subject_id != item_id:
                        continue
                    if kind == "acceptability":
                        row[col[j.annotator_id]] = bool(j.payload["accept"])
                    else:
                        c = j.payload["choice"]
                        if c == "tie":
                            row[col[j.annotator_id]] = "tie"
                        elif c == "left":
                            row[col[j.annotator_id]] = j.payload["left_source"]
                        else:
                            row[col[j.annotator_id]] = j.payload["right_source"]
                rows.append(row)
            return rows, annotators

        # absolute: one row per (item, attribute), coded on [-1, 1]
        from explpipe.annotation.payloads import ABSOLUTE_ATTRIBUTES

        rows = []
        for item_id in study.items:
            item_js = [j for j in js if j.subject_id == item_id]
            if not item_js:
                rows.append([None] * len(annotators))
                continue
            coded = encode_absolute_scores([j.payload for j in item_js])
            for attr in ABSOLUTE_ATTRIBUTES:
                row = [None] * len(annotators)
                for j, value in zip(item_js, coded[attr]):
                    row[col[j.annotator_id]] = value
                rows.append(row)
        return rows, annotators

    def agreement(self, study_id: str, scale: Optional[str] = None) -> AgreementReport:
        study = self.studies[study_id]
        if scale is None:
            scale = "interval" if study.judgment_kind == "absolute" else "nominal"
        rows, _ = self.agreement_matrix(study_id)
        return krippendorff_alpha(rows, scale=scale)


def aggregate_acceptability_judgments(
    candidate_id: str, judgments: Sequence[Judgment]
) -> AggregatedLabel:
    """Pure aggregation over one candidate's acceptability judgments."""
    n_accept = sum(1 for j in judgments if j.payload["accept"])
    return AggregatedLabel.from_counts(candidate_id, n_accept, n_raters=len(judgments))


def aggregate_from_judgments(
    judgments: Sequence[Judgment], n_raters: int = 3
) -> tuple[list[AggregatedLabel], int]:
    """Recompute all labels from a flat judgment list (e.g. judgments.jsonl).

    Returns (labels sorted by candidate id, count of incomplete items).
    Aggregation is a pure function of the judgment set: feeding back a
    study's judgment file reproduces its labels file exactly.
    """
    by_subject: dict[str, list[Judgment]] = {}
    for j in judgments:
        if j.kind == "acceptability" and not j.excluded:
            by_subject.setdefault(j.subject_id, []).append(j)
    labels = []
    incomplete = 0
    for subject_id in sorted(by_subject):
        js = by_subject[subject_id]
        if len(js) != n_raters:
            incomplete += 1
            continue
        labels.append(aggregate_acceptability_judgments(subject_id, js))
    return labels, incomplete
