"""Run manifest: one entry per executed stage with config and input hashes.

A stage whose config hash and input hashes match its latest manifest entry
(and whose outputs still exist) is up to date and skipped unless forced, so
a run directory plus its manifest fully determines every output.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(payload: object) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


@dataclass(frozen=True)
class StageRecord:
    stage: str
    config_hash: str
    input_hashes: Mapping[str, str]
    outputs: tuple[str, ...]
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    )


class RunManifest:
    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        self.path = self.run_dir / "manifest.jsonl"

    def entries(self) -> list[StageRecord]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    raw = json.loads(line)
                    raw["input_hashes"] = dict(raw["input_hashes"])
                    raw["outputs"] = tuple(raw["outputs"])
                    out.append(StageRecord(**raw))
        return out

    def latest(self, stage: str) -> Optional[StageRecord]:
        record = None
        for entry in self.entries():
            if entry.stage == stage:
                record = entry
        return record

    def is_up_to_date(
        self, stage: str, cfg_hash: str, input_hashes: Mapping[str, str]
    ) -> bool:
        record = self.latest(stage)
        if record is None:
            return False
        if record.config_hash != cfg_hash or dict(record.input_hashes) != dict(input_hashes):
            return False
        return all((self.run_dir / out).exists() for out in record.outputs)

    def record(
        self,
        stage: str,
        cfg_hash: str,
        input_hashes: Mapping[str, str],
        outputs: Sequence[str],
    ) -> StageRecord:
        entry = StageRecord(
            stage=stage,
            config_hash=cfg_hash,
            input_hashes=dict(input_hashes),
            outputs=tuple(outputs),
        )
        self.run_dir.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(asdict(entry), sort_keys=True) + "\n")
        return entry
