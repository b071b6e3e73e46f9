"""JSON Lines persistence with a schema-version header line.

Every file starts with ``{"schema_version": 1, "entity": "<name>"}``; each
following line is one record. Files are flat, diffable, and append-friendly:
one directory per experiment run, one file per entity type.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from explpipe.core.errors import ParseError, SchemaVersionError
from explpipe.core.types import (
    AggregatedLabel,
    ExplanationCandidate,
    Judgment,
    PromptExample,
    TaskInstance,
)

SCHEMA_VERSION = 1

# entity name -> (to_record, from_record)
_CODECS: dict[str, tuple[Callable[[Any], dict], Callable[[dict], Any]]] = {
    "instance": (TaskInstance.to_record, TaskInstance.from_record),
    "prompt_example": (PromptExample.to_record, PromptExample.from_record),
    "candidate": (ExplanationCandidate.to_record, ExplanationCandidate.from_record),
    "judgment": (Judgment.to_record, Judgment.from_record),
    "label": (AggregatedLabel.to_record, AggregatedLabel.from_record),
}

# canonical file name per entity within a run directory
ENTITY_FILES = {
    "instance": "instances.jsonl",
    "prompt_example": "prompt_pool.jsonl",
    "candidate": "candidates.jsonl",
    "judgment": "judgments.jsonl",
    "label": "labels.jsonl",
    "score": "scores.jsonl",
}


def write_records(path: str | Path, entity: str, records: Iterable[dict]) -> int:
    """Write raw dict records under a header line. Returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    n = 0
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(json.dumps({"schema_version": SCHEMA_VERSION, "entity": entity}) + "\n")
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    os.replace(tmp, path)
    return n


def read_records(path: str | Path, entity: str | None = None) -> list[dict]:
    """Read raw dict records, validating the header line."""
    path = Path(path)
    records: list[dict] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(str(path), line_no, f"invalid JSON: {e.msg}") from e
            if line_no == 1:
                version = rec.get("schema_version")
                if version != SCHEMA_VERSION:
                    raise SchemaVersionError(str(path), version, SCHEMA_VERSION)
                if entity is not None and rec.get("entity") != entity:
                    raise ParseError(
                        str(path), 1, f"entity {rec.get('entity')!r}, expected {entity!r}"
                    )
                continue
            records.append(rec)
    return records


def save(path: str | Path, entity: str, objects: Sequence[Any]) -> int:
    to_record, _ = _CODECS[entity]
    return write_records(path, entity, (to_record(obj) for obj in objects))


def load(path: str | Path, entity: str) -> list[Any]:
    _, from_record = _CODECS[entity]
    return [from_record(rec) for rec in read_records(path, entity)]


def append_record(path: str | Path, entity: str, record: dict) -> None:
    """Append one record, writing the header first if the file is new."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    is_new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8") as f:
        if is_new:
            f.write(json.dumps({"schema_version": SCHEMA_VERSION, "entity": entity}) + "\n")
        f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def save_instances(path, instances: Sequence[TaskInstance]) -> int:
    return save(path, "instance", instances)


def load_instances(path) -> list[TaskInstance]:
    return load(path, "instance")


def save_prompt_pool(path, pool: Sequence[PromptExample]) -> int:
    return save(path, "prompt_example", pool)


def load_prompt_pool(path) -> list[PromptExample]:
    return load(path, "prompt_example")


def save_candidates(path, candidates: Sequence[ExplanationCandidate]) -> int:
    return save(path, "candidate", candidates)


def load_candidates(path) -> list[ExplanationCandidate]:
    return load(path, "candidate")


def save_judgments(path, judgments: Sequence[Judgment]) -> int:
    return save(path, "judgment", judgments)


def load_judgments(path) -> list[Judgment]:
    return load(path, "judgment")


def save_labels(path, labels: Sequence[AggregatedLabel]) -> int:
    return save(path, "label", labels)


def load_labels(path) -> list[AggregatedLabel]:
    return load(path, "label")
