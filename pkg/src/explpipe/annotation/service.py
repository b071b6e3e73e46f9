"""HTTP service for the human studies.

Raters identify with an X-Annotator-Id token; study creation needs the admin
token. Page checkout is claim-with-lease (GET /studies/{id}/next), full pages
are submitted in one POST /judgments call, and the rater UI is served as
static assets from the same process.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Response
from fastapi.staticfiles import StaticFiles

from explpipe import __version__
from explpipe.annotation.payloads import FlowViolation
from explpipe.annotation.schemas import (
    AgreementResponse,
    CreateStudyRequest,
    CreateStudyResponse,
    HealthResponse,
    PageResponse,
    ProgressResponse,
    QualificationResponse,
    SubmitJudgmentsRequest,
    SubmitJudgmentsResponse,
)
from explpipe.annotation.studies import (
    AssignmentError,
    DuplicateJudgmentError,
    QualificationError,
    StudyStore,
)

ENV_ADMIN_TOKEN = "EXPLPIPE_ADMIN_TOKEN"


def create_app(
    store: StudyStore,
    admin_token: Optional[str] = None,
    static_dir: Optional[str | Path] = None,
) -> FastAPI:
    admin_token = admin_token or os.environ.get(ENV_ADMIN_TOKEN)
    app = FastAPI(title="explpipe annotation service", version=__version__)
    app.state.store = store

    def annotator(x_annotator_id: str = Header()) -> str:
        if not x_annotator_id.strip():
            raise HTTPException(status_code=401, detail="missing annotator token")
        return x_annotator_id

    def require_admin(x_admin_token: Optional[str] = Header(default=None)) -> None:
        if admin_token and x_admin_token != admin_token:
            raise HTTPException(status_code=401, detail="admin token required")

    def get_study(study_id: str):
        study = store.studies.get(study_id)
        if study is None:
            raise HTTPException(status_code=404, detail=f"no study {study_id}")
        return study

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/studies", response_model=CreateStudyResponse, dependencies=[Depends(require_admin)])
    def create_study(request: CreateStudyRequest) -> CreateStudyResponse:
        for item in request.items:
            if "item_id" not in item:
                raise HTTPException(status_code=422, detail="every item needs an item_id")
        try:
            study = store.create_study(
                kind=request.kind,
                items=request.items,
                raters_per_item=request.raters_per_item,
                batch_size=request.batch_size,
                flow_mode=request.flow_mode,
                study_id=request.study_id,
                requires_qualification=request.requires_qualification,
                pass_score=request.pass_score,
            )
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        return CreateStudyResponse(
            study_id=study.study_id,
            kind=study.kind,
            n_items=len(study.items),
            n_pages=len(study.pages),
            assignments_total=len(study.pages) * study.raters_per_item,
        )

    @app.get("/studies/{study_id}/next", response_model=PageResponse)
    def next_page(study_id: str, annotator_id: str = Depends(annotator)):
        study = get_study(study_id)
        try:
            page = store.claim_next(study_id, annotator_id)
        except QualificationError as e:
            raise HTTPException(status_code=403, detail=str(e)) from e
        if page is None:
            return Response(status_code=204)
        return PageResponse(
            study_id=study_id,
            page_id=page.page_id,
            kind=study.kind,
            flow_mode=study.flow_mode,
            items=store.rater_view(study, page, annotator_id),
        )

    @app.post("/judgments", response_model=SubmitJudgmentsResponse)
    def submit_judgments(
        request: SubmitJudgmentsRequest, annotator_id: str = Depends(annotator)
    ) -> SubmitJudgmentsResponse:
        get_study(request.study_id)
        try:
            judgments = store.submit_page(
                study_id=request.study_id,
                page_id=request.page_id,
                annotator_id=annotator_id,
                responses=[(r.item_id, r.payload) for r in request.responses],
                elapsed_ms=request.elapsed_ms,
            )
        except DuplicateJudgmentError as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        except QualificationError as e:
            raise HTTPException(status_code=403, detail=str(e)) from e
        except AssignmentError as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        except FlowViolation as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        return SubmitJudgmentsResponse(judgment_ids=[j.judgment_id for j in judgments])

    @app.get("/studies/{study_id}/progress", response_model=ProgressResponse)
    def progress(study_id: str) -> ProgressResponse:
        get_study(study_id)
        return ProgressResponse(**store.progress(study_id))

    @app.get("/studies/{study_id}/agreement", response_model=AgreementResponse)
    def agreement(study_id: str, scale: Optional[str] = None) -> AgreementResponse:
        get_study(study_id)
        try:
            report = store.agreement(study_id, scale)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        return AgreementResponse(
            alpha=report.alpha,
            defined=report.defined,
            n_items=report.n_items,
            n_raters=report.n_raters,
            scale=report.scale,
        )

    @app.get(
        "/annotators/{annotator_id}/qualifications/{exam_id}",
        response_model=QualificationResponse,
    )
    def qualification(annotator_id: str, exam_id: str) -> QualificationResponse:
        grant = store.qualifications.get((annotator_id, exam_id))
        if grant is None:
            raise HTTPException(status_code=404, detail="no qualification record")
        return QualificationResponse(**grant)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
