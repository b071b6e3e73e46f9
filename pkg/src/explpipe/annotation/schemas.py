"""Pydantic request/response models for the annotation service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class CreateStudyRequest(BaseModel):
    kind: Literal["acceptability", "head_to_head", "absolute", "qualification"]
    items: list[dict[str, Any]] = Field(min_length=1)
    raters_per_item: int = 3
    batch_size: Optional[int] = None
    flow_mode: Literal["mcqa", "nli"] = "mcqa"
    study_id: Optional[str] = None
    requires_qualification: Optional[str] = None
    pass_score: Optional[float] = None


class CreateStudyResponse(BaseModel):
    study_id: str
    kind: str
    n_items: int
    n_pages: int
    assignments_total: int


class PageResponse(BaseModel):
    study_id: str
    page_id: str
    kind: str
    flow_mode: str
    items: list[dict[str, Any]]


class ItemResponse(BaseModel):
    item_id: str
    payload: dict[str, Any]


class SubmitJudgmentsRequest(BaseModel):
    study_id: str
    page_id: str
    elapsed_ms: int = Field(ge=0)
    responses: list[ItemResponse] = Field(min_length=1)


class SubmitJudgmentsResponse(BaseModel):
    judgment_ids: list[str]


class ProgressResponse(BaseModel):
    study_id: str
    pages: int
    items: int
    assignments_total: int
    assignments_completed: int
    assignments_leased: int
    assignments_pending: int
    distinct_annotators: int


class AgreementResponse(BaseModel):
    alpha: Optional[float]
    defined: bool
    n_items: int
    n_raters: int
    scale: str


class QualificationResponse(BaseModel):
    annotator_id: str
    exam_id: str
    score: float
    passed: bool


class HealthResponse(BaseModel):
    status: str
    version: str
