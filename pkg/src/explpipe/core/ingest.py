"""Corpus ingestion and referential-integrity validation.

Two input formats: native JSON Lines (one instance record per line, with or
without the standard header line) and CSV with a caller-declared column
mapping. Dataset files are always supplied by path; nothing is downloaded.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Optional, Sequence

from explpipe.core.errors import DuplicateIdError, InvariantError, ParseError
from explpipe.core.jsonl import (
    ENTITY_FILES,
    SCHEMA_VERSION,
    load_candidates,
    load_judgments,
    load_labels,
    read_records,
)
from explpipe.core.types import Split, Task, TaskInstance


def ingest_corpus(
    path: str | Path,
    format: str = "jsonl",
    column_map: Optional[Mapping[str, str]] = None,
    default_split: Split = Split.TRAIN,
) -> list[TaskInstance]:
    """Read a corpus file into validated instances, preserving order.

    ``column_map`` (CSV only) maps TaskInstance field names to CSV column
    names; a ``task`` entry may name either a column or a fixed task value.
    Parse failures report the line number, invariant violations the instance
    id, and duplicate ids are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(str(path), 0, "file does not exist")
    if format == "jsonl":
        instances = _ingest_jsonl(path, default_split)
    elif format == "csv":
        if column_map is None:
            raise ValueError("CSV ingestion requires a column_map")
        instances = _ingest_csv(path, column_map, default_split)
    else:
        raise ValueError(f"unknown corpus format {format!r}")

    seen: set[str] = set()
    for inst in instances:
        if inst.id in seen:
            raise DuplicateIdError(inst.id)
        seen.add(inst.id)
    return instances


def _record_to_instance(rec: dict, line_no: int, path: Path, default_split: Split) -> TaskInstance:
    rec = dict(rec)
    rec.setdefault("split", default_split.value)
    if not rec.get("id"):
        # deterministic fallback id: hash of the record's content
        from explpipe.core.types import content_id

        rec["id"] = content_id(
            str(rec.get("task")),
            str(rec.get("question") or rec.get("premise")),
            str(rec.get("hypothesis")),
            str(rec.get("gold_label")),
        )
    try:
        return TaskInstance.from_record(rec)
    except InvariantError:
        raise
    except (KeyError, ValueError, TypeError) as e:
        raise ParseError(str(path), line_no, f"bad instance record: {e}") from e


def _ingest_jsonl(path: Path, default_split: Split) -> list[TaskInstance]:
    instances = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(str(path), line_no, f"invalid JSON: {e.msg}") from e
            if line_no == 1 and "schema_version" in rec and "id" not in rec:
                if rec["schema_version"] != SCHEMA_VERSION:
                    from explpipe.core.errors import SchemaVersionError

                    raise SchemaVersionError(str(path), rec["schema_version"], SCHEMA_VERSION)
                continue
            instances.append(_record_to_instance(rec, line_no, path, default_split))
    return instances


def _ingest_csv(path: Path, column_map: Mapping[str, str], default_split: Split) -> list[TaskInstance]:
    instances = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for line_no, row in enumerate(reader, start=2):  # header is line 1
            rec: dict = {}
            for field, column in column_map.items():
                if field == "task" and column not in row:
                    rec["task"] = column  # fixed task value, not a column
                    continue
                if column not in row:
                    raise ParseError(str(path), line_no, f"missing column {column!r}")
                rec[field] = row[column]
            if "choices" in rec and isinstance(rec["choices"], str):
                rec["choices"] = [c.strip() for c in rec["choices"].split("|")]
            instances.append(_record_to_instance(rec, line_no, path, default_split))
    return instances


def validate_run_dir(run_dir: str | Path) -> list[str]:
    """Referential-integrity pass over a run directory.

    Checks that every candidate's instance_id, every label's and score's
    candidate_id, and every judgment's subject_id resolves. Returns a list
    of human-readable problems (empty means the directory is consistent).
    """
    run_dir = Path(run_dir)
    problems: list[str] = []

    instance_ids: set[str] = set()
    inst_path = run_dir / ENTITY_FILES["instance"]
    if inst_path.exists():
        from explpipe.core.jsonl import load_instances

        instance_ids = {i.id for i in load_instances(inst_path)}

    candidate_ids: set[str] = set()
    cand_path = run_dir / ENTITY_FILES["candidate"]
    if cand_path.exists():
        candidates = load_candidates(cand_path)
        candidate_ids = {c.candidate_id for c in candidates}
        if instance_ids:
            for c in candidates:
                if c.instance_id not in instance_ids:
                    problems.append(
                        f"candidate {c.candidate_id}: unresolved instance {c.instance_id}"
                    )

    study_item_ids: set[str] = set()
    studies_path = run_dir / "studies.jsonl"
    if studies_path.exists():
        for rec in read_records(studies_path, "study"):
            for item in rec.get("items", []):
                study_item_ids.add(item["item_id"])

    judg_path = run_dir / ENTITY_FILES["judgment"]
    if judg_path.exists():
        known = candidate_ids | study_item_ids
        for j in load_judgments(judg_path):
            if known and j.subject_id not in known:
                problems.append(f"judgment {j.judgment_id}: unresolved subject {j.subject_id}")

    label_path = run_dir / ENTITY_FILES["label"]
    if label_path.exists() and candidate_ids:
        for lab in load_labels(label_path):
            if lab.candidate_id not in candidate_ids:
                problems.append(f"label for unresolved candidate {lab.candidate_id}")

    score_path = run_dir / ENTITY_FILES["score"]
    if score_path.exists() and candidate_ids:
        for rec in read_records(score_path, "score"):
            if rec["candidate_id"] not in candidate_ids:
                problems.append(f"score for unresolved candidate {rec['candidate_id']}")

    return problems


def check_unique_ids(instances: Sequence[TaskInstance]) -> None:
    seen: set[str] = set()
    for inst in instances:
        if inst.id in seen:
            raise DuplicateIdError(inst.id)
        seen.add(inst.id)
