"""Qualification exam fixtures: packaged exam content plus a helper to
register the exam as a study. Passing raters are granted the qualification
automatically when their last exam page is graded."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from explpipe.annotation.studies import Study, StudyStore

FIXTURE_DIR = Path(__file__).parent / "fixtures"
DEFAULT_EXAM = FIXTURE_DIR / "qualification_exam.json"


def load_exam_fixture(path: Optional[str | Path] = None) -> dict:
    with open(path or DEFAULT_EXAM, encoding="utf-8") as f:
        fixture = json.load(f)
    for key in ("exam_id", "pass_score", "items"):
        if key not in fixture:
            raise ValueError(f"exam fixture missing {key!r}")
    return fixture


def create_exam_study(store: StudyStore, fixture: Optional[dict] = None) -> Study:
    fixture = fixture or load_exam_fixture()
    return store.create_study(
        kind="qualification",
        items=fixture["items"],
        raters_per_item=1,
        batch_size=fixture.get("batch_size", 3),
        flow_mode=fixture.get("flow_mode", "mcqa"),
        study_id=fixture["exam_id"],
        pass_score=fixture["pass_score"],
    )
