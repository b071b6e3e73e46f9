"""Reference external scorer: a keyword rule behind the wire protocol.

Serves as the conformance target for the protocol tests (wire scores must
equal in-process evaluation of the same rule) and as a stand-in for
out-of-process fine-tuned scorers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from fastapi import FastAPI
from pydantic import BaseModel


@dataclass(frozen=True)
class KeywordScorer:
    """Scores ``hit`` when any keyword occurs in the input, else ``miss``."""

    keywords: tuple[str, ...]
    hit: float = 0.9
    miss: float = 0.1

    def score_text(self, text: str) -> float:
        lowered = text.lower()
        return self.hit if any(k.lower() in lowered for k in self.keywords) else self.miss

    def score(self, texts: Sequence[str]) -> list[float]:
        return [self.score_text(t) for t in texts]


class ScoreRequest(BaseModel):
    inputs: list[str]


class ScoreResponse(BaseModel):
    probs: list[float]
    version: str


class HealthResponse(BaseModel):
    status: str
    version: str


def create_scorer_app(scorer: KeywordScorer, version: str = "keyword-ref-1") -> FastAPI:
    app = FastAPI(title="reference acceptability scorer")

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=version)

    @app.post("/v1/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        return ScoreResponse(probs=scorer.score(request.inputs), version=version)

    return app
