"""Judgment payload validation and numeric coding of the absolute attributes.

The absolute study is a two-part flow with conditional questions: label
support is asked only when the explanation adds new information (except in
NLI mode, where it is always asked), and amount-of-information only when the
new information supports the label. Validation enforces exactly the payload
shapes those flows can produce.
"""

from __future__ import annotations

from typing import Any, Mapping, Optional, Sequence

FACTUALITY_VALUES = ("generally_false", "sometimes_true", "generally_true", "need_more_info")
AMOUNT_VALUES = ("not_enough", "enough", "too_much")
H2H_CHOICES = ("left", "right", "tie")
FLOW_MODES = ("mcqa", "nli")

# attributes reported by encode_absolute_scores, in display order
ABSOLUTE_ATTRIBUTES = (
    "generality",
    "factuality",
    "grammar",
    "new_info",
    "supports_label",
    "amount_info",
    "acceptable",
)


class FlowViolation(ValueError):
    """The payload is inconsistent with the study's conditional question flow."""


def _require_bool(payload: Mapping[str, Any], key: str):
    if key not in payload or not isinstance(payload[key], bool):
        raise FlowViolation(f"{key} must be present and boolean")
    return payload[key]


def validate_acceptability(payload: Mapping[str, Any]) -> dict[str, Any]:
    accept = _require_bool(payload, "accept")
    extra = set(payload) - {"accept"}
    if extra:
        raise FlowViolation(f"unexpected acceptability fields: {sorted(extra)}")
    return {"accept": accept}


def validate_head_to_head(payload: Mapping[str, Any]) -> dict[str, Any]:
    choice = payload.get("choice")
    if choice not in H2H_CHOICES:
        raise FlowViolation(f"choice must be one of {H2H_CHOICES}, got {choice!r}")
    for key in ("left_source", "right_source"):
        if not payload.get(key):
            raise FlowViolation(f"{key} missing")
    return {
        "choice": choice,
        "left_source": payload["left_source"],
        "right_source": payload["right_source"],
    }


def validate_absolute(payload: Mapping[str, Any], flow_mode: str = "mcqa") -> dict[str, Any]:
    if flow_mode not in FLOW_MODES:
        raise ValueError(f"flow_mode must be one of {FLOW_MODES}")
    factuality = payload.get("factuality")
    if factuality not in FACTUALITY_VALUES:
        raise FlowViolation(f"factuality must be one of {FACTUALITY_VALUES}, got {factuality!r}")
    grammar = _require_bool(payload, "grammar")
    new_info = _require_bool(payload, "new_info")
    acceptable = _require_bool(payload, "acceptable")

    supports_label: Optional[bool] = payload.get("supports_label")
    amount_info: Optional[str] = payload.get("amount_info")

    supports_expected = True if flow_mode == "nli" else new_info
    if supports_expected:
        if not isinstance(supports_label, bool):
            raise FlowViolation("supports_label required by the flow but missing")
    elif supports_label is not None:
        raise FlowViolation("supports_label answered but the flow never asks it")

    amount_expected = bool(supports_label) if supports_expected else False
    if amount_expected:
        if amount_info not in AMOUNT_VALUES:
            raise FlowViolation(
                f"amount_info required by the flow; must be one of {AMOUNT_VALUES}"
            )
    elif amount_info is not None:
        raise FlowViolation("amount_info answered but the flow never asks it")

    return {
        "factuality": factuality,
        "grammar": grammar,
        "new_info": new_info,
        "supports_label": supports_label,
        "amount_info": amount_info,
        "acceptable": acceptable,
    }


def validate_payload(kind: str, payload: Mapping[str, Any], flow_mode: str = "mcqa") -> dict[str, Any]:
    if kind == "acceptability":
        return validate_acceptability(payload)
    if kind == "head_to_head":
        return validate_head_to_head(payload)
    if kind == "absolute":
        return validate_absolute(payload, flow_mode)
    raise ValueError(f"unknown judgment kind {kind!r}")


def _code_binary(value: bool) -> float:
    return 1.0 if value else -1.0


def encode_absolute_scores(
    payloads: Sequence[Mapping[str, Any]],
) -> dict[str, list[Optional[float]]]:
    """Code absolute payloads as per-attribute vectors on [-1, 1].

    Binary attributes map to {-1, +1}; factuality and amount-of-information
    to {-1, 0, +1}; generality is derived from whether factuality could be
    judged at all. Questions the flow never asked stay None, so attribute
    vectors carry different effective sample sizes.
    """
    vectors: dict[str, list[Optional[float]]] = {a: [] for a in ABSOLUTE_ATTRIBUTES}
    factuality_code = {"generally_false": -1.0, "sometimes_true": 0.0, "generally_true": 1.0}
    amount_code = {"not_enough": -1.0, "enough": 0.0, "too_much": 1.0}
    for p in payloads:
        fact = p["factuality"]
        vectors["generality"].append(_code_binary(fact != "need_more_info"))
        vectors["factuality"].append(factuality_code.get(fact))
        vectors["grammar"].append(_code_binary(p["grammar"]))
        vectors["new_info"].append(_code_binary(p["new_info"]))
        supports = p.get("supports_label")
        vectors["supports_label"].append(None if supports is None else _code_binary(supports))
        amount = p.get("amount_info")
        vectors["amount_info"].append(None if amount is None else amount_code[amount])
        vectors["acceptable"].append(_code_binary(p["acceptable"]))
    return vectors


def attribute_means(
    vectors: Mapping[str, Sequence[Optional[float]]],
) -> dict[str, tuple[Optional[float], int]]:
    """(mean, n) per attribute, skipping unanswered entries."""
    out: dict[str, tuple[Optional[float], int]] = {}
    for attr, vec in vectors.items():
        answered = [v for v in vec if v is not None]
        out[attr] = (sum(answered) / len(answered) if answered else None, len(answered))
    return out


def attribute_acceptability_correlations(
    payloads: Sequence[Mapping[str, Any]],
    n_permutations: int = 10_000,
    seed: int = 0,
) -> dict[str, dict[str, float]]:
    """Spearman correlation between acceptability and every other attribute,
    over individual annotations. Unanswered conditional questions drop out
    pairwise, so each attribute reports its own n."""
    from explpipe.metrics.ranking import UndefinedMetricError
    from explpipe.metrics.stats import spearman_rho

    vectors = encode_absolute_scores(payloads)
    acceptable = vectors["acceptable"]
    out: dict[str, dict[str, float]] = {}
    for attr in ABSOLUTE_ATTRIBUTES:
        if attr == "acceptable":
            continue
        pairs = [
            (a, v)
            for a, v in zip(acceptable, vectors[attr])
            if a is not None and v is not None
        ]
        if len(pairs) < 3:
            continue
        x = [v for _, v in pairs]
        y = [a for a, _ in pairs]
        try:
            result = spearman_rho(x, y, n_permutations=n_permutations, seed=seed)
        except UndefinedMetricError:
            continue
        out[attr] = {"rho": result.rho, "p": result.p_two_sided, "n": len(pairs)}
    return out
