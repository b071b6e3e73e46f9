"""Scoring backends and select-1 candidate selection.

Three interchangeable score sources: the generator's own sequence
log-likelihood (NLL baseline), the built-in hashed-linear classifier, and an
external scorer reached over HTTP. Scores are ranking signals; select_one is
invariant under any strictly monotone transform of them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import httpx

from explpipe.core.types import ExplanationCandidate, TaskInstance
from explpipe.filtering.hashed_linear import HashedLinearModel
from explpipe.filtering.inputs import filter_input_for_candidate, format_filter_input

log = logging.getLogger(__name__)

# ranks degenerate (empty) candidates below any real completion
DEGENERATE_SCORE = -1e30


class MissingLogprobsError(ValueError):
    def __init__(self, candidate_id: str):
        super().__init__(f"candidate {candidate_id} carries no token logprobs")


class ScorerProtocolError(Exception):
    """The external scorer broke the wire contract (length mismatch, bad body)."""


@dataclass(frozen=True)
class FilterScore:
    candidate_id: str
    value: float


@dataclass(frozen=True)
class FilterScoreSet:
    """Per-candidate scores from one backend, in input order.

    ``kind`` declares the monotone meaning: "probability" values live in
    [0, 1]; "log_likelihood" values are raw but rank the same way (higher is
    more acceptable).
    """

    backend_id: str
    kind: str
    scores: tuple[FilterScore, ...]

    def __post_init__(self):
        if self.kind not in ("probability", "log_likelihood"):
            raise ValueError(f"unknown score kind {self.kind!r}")
        if self.kind == "probability":
            for s in self.scores:
                if not (0.0 <= s.value <= 1.0):
                    raise ValueError(f"probability {s.value} for {s.candidate_id} outside [0,1]")

    def value_of(self, candidate_id: str) -> float:
        for s in self.scores:
            if s.candidate_id == candidate_id:
                return s.value
        raise KeyError(candidate_id)

    def as_dict(self) -> dict[str, float]:
        return {s.candidate_id: s.value for s in self.scores}

    def to_records(self) -> list[dict]:
        return [
            {
                "candidate_id": s.candidate_id,
                "backend_id": self.backend_id,
                "kind": self.kind,
                "value": s.value,
            }
            for s in self.scores
        ]

    @classmethod
    def from_records(cls, records: Sequence[Mapping]) -> "FilterScoreSet":
        if not records:
            raise ValueError("no score records")
        backend = records[0]["backend_id"]
        kind = records[0]["kind"]
        return cls(
            backend_id=backend,
            kind=kind,
            scores=tuple(FilterScore(r["candidate_id"], r["value"]) for r in records),
        )


def score_nll(
    candidates: Sequence[ExplanationCandidate],
    length_normalized: bool = False,
) -> FilterScoreSet:
    """Rank by the generator's own sequence log-probability (sum of token
    logprobs; mean per token behind the flag). Not a calibrated probability."""
    scores = []
    for c in candidates:
        if not c.token_logprobs:
            if c.degenerate:
                scores.append(FilterScore(c.candidate_id, DEGENERATE_SCORE))
                continue
            raise MissingLogprobsError(c.candidate_id)
        value = c.total_logprob
        if length_normalized:
            value /= len(c.token_logprobs)
        scores.append(FilterScore(c.candidate_id, value))
    backend = "nll:mean" if length_normalized else "nll:sum"
    return FilterScoreSet(backend_id=backend, kind="log_likelihood", scores=tuple(scores))


def score_builtin(
    model: HashedLinearModel,
    candidates: Sequence[ExplanationCandidate],
    instances_by_id: Mapping[str, TaskInstance],
) -> FilterScoreSet:
    """Probabilities from the built-in classifier, batch order preserved."""
    texts = []
    kept: list[ExplanationCandidate] = []
    degenerate: list[ExplanationCandidate] = []
    for c in candidates:
        if c.degenerate:
            degenerate.append(c)
            continue
        fi = filter_input_for_candidate(c, instances_by_id[c.instance_id], model.mode)
        texts.append(format_filter_input(fi))
        kept.append(c)
    probs = model.score_texts(texts) if kept else []
    by_id = {c.candidate_id: float(p) for c, p in zip(kept, probs)}
    by_id.update({c.candidate_id: 0.0 for c in degenerate})
    return FilterScoreSet(
        backend_id=f"builtin:{model.mode}:seed{model.seed}",
        kind="probability",
        scores=tuple(FilterScore(c.candidate_id, by_id[c.candidate_id]) for c in candidates),
    )


def select_one(
    candidates: Sequence[ExplanationCandidate],
    score_set: FilterScoreSet,
) -> ExplanationCandidate:
    """Argmax over the candidate set; ties break by candidate order (greedy
    first, then sample index), so an all-tied score set returns greedy."""
    if not candidates:
        raise ValueError("no candidates to select from")
    values = [score_set.value_of(c.candidate_id) for c in candidates]
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return candidates[best]


class ExternalScorerClient:
    """Client half of the external-scorer wire protocol.

    POST /v1/score with {"inputs": [...]} must return {"probs": [...]} of the
    same length and order plus a version string; GET /health reports
    liveness. A length mismatch is a protocol error, retried once per batch.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url
        self._http = httpx.Client(base_url=base_url, timeout=timeout, transport=transport)
        self._version: Optional[str] = None

    @property
    def version(self) -> str:
        if self._version is None:
            self.health()
        return self._version or "unknown"

    def health(self) -> dict:
        response = self._http.get("/health")
        response.raise_for_status()
        payload = response.json()
        self._version = payload.get("version", "unknown")
        return payload

    def score(self, inputs: Sequence[str]) -> list[float]:
        inputs = list(inputs)
        last_error: Optional[Exception] = None
        for attempt in range(2):  # one retry on protocol violations
            try:
                response = self._http.post("/v1/score", json={"inputs": inputs})
                response.raise_for_status()
                payload = response.json()
                probs = payload.get("probs")
                if not isinstance(probs, list) or len(probs) != len(inputs):
                    raise ScorerProtocolError(
                        f"expected {len(inputs)} probs, got "
                        f"{len(probs) if isinstance(probs, list) else type(probs).__name__}"
                    )
                if "version" in payload:
                    self._version = payload["version"]
                return [float(p) for p in probs]
            except (ScorerProtocolError, httpx.HTTPError) as e:
                last_error = e
                if attempt == 0:
                    log.warning("external scorer batch failed (%s); retrying once", e)
        raise ScorerProtocolError(f"external scorer failed after retry: {last_error}")

    def close(self) -> None:
        self._http.close()


def score_external(
    client: ExternalScorerClient,
    candidates: Sequence[ExplanationCandidate],
    instances_by_id: Mapping[str, TaskInstance],
    mode: str = "full",
    batch_size: int = 64,
) -> tuple[FilterScoreSet, list[tuple[str, str]]]:
    """Score through the wire protocol in batches.

    A batch that still fails after its retry surfaces as per-candidate
    failures (returned, not raised) while the remaining batches continue.
    """
    entries: list[tuple[ExplanationCandidate, Optional[str]]] = []
    for c in candidates:
        if c.degenerate:
            entries.append((c, None))
        else:
            fi = filter_input_for_candidate(c, instances_by_id[c.instance_id], mode)
            entries.append((c, format_filter_input(fi)))

    values: dict[str, float] = {c.candidate_id: 0.0 for c, t in entries if t is None}
    failures: list[tuple[str, str]] = []
    scorable = [(c, t) for c, t in entries if t is not None]
    for start in range(0, len(scorable), batch_size):
        batch = scorable[start : start + batch_size]
        try:
            probs = client.score([t for _, t in batch])
        except ScorerProtocolError as e:
            failures.extend((c.candidate_id, str(e)) for c, _ in batch)
            continue
        for (c, _), p in zip(batch, probs):
            values[c.candidate_id] = p

    scores = tuple(
        FilterScore(c.candidate_id, values[c.candidate_id])
        for c in candidates
        if c.candidate_id in values
    )
    score_set = FilterScoreSet(
        backend_id=f"external:{client.version}", kind="probability", scores=scores
    )
    return score_set, failures
