"""Evaluation report: one structure holding select-1 accuracy, explanation-
level AP, the reference rows (random / constant / NLL / oracle), agreement,
and provenance; rendered as JSON, an aligned text table, or per-item CSV.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence


@dataclass(frozen=True)
class BackendRow:
    backend_id: str
    select1: Optional[float]
    ap: Optional[float]
    select1_stderr: float = 0.0
    ap_stderr: float = 0.0


@dataclass(frozen=True)
class MetricsReport:
    experiment: str
    threshold: str  # "3of3" | "2of3"
    n_instances: int
    n_candidates: int
    random_select1: float
    random_select1_stderr: float
    random_ap: float
    random_ap_stderr: float
    constant_ap: float
    backends: tuple[BackendRow, ...]
    oracle_select1: float
    oracle_ap: float
    agreement_alpha: Optional[float]
    correlations: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    extras: Mapping[str, float] = field(default_factory=dict)
    provenance: Mapping[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        raw = json.loads(text)
        raw["backends"] = tuple(BackendRow(**row) for row in raw["backends"])
        return cls(**raw)


def _fmt(value: Optional[float], stderr: float = 0.0) -> str:
    if value is None:
        return "undef"
    if stderr:
        return f"{value:.1f} ±{stderr:.1f}"
    return f"{value:.1f}"


def render_table(report: MetricsReport) -> str:
    """Aligned text table, one row per scorer, mirroring the results-table
    layout (Random / Constant / NLL / trained backends / Oracle)."""
    suffix = {"3of3": "3/3", "2of3": "2/3"}[report.threshold]
    rows: list[tuple[str, str, str]] = [
        (
            "Random",
            _fmt(report.random_select1, report.random_select1_stderr),
            _fmt(report.random_ap, report.random_ap_stderr),
        ),
        ("Constant", "---", _fmt(report.constant_ap)),
    ]
    for backend in report.backends:
        rows.append(
            (
                backend.backend_id,
                _fmt(backend.select1, backend.select1_stderr),
                _fmt(backend.ap, backend.ap_stderr),
            )
        )
    rows.append(("Oracle U.B.", _fmt(report.oracle_select1), _fmt(report.oracle_ap)))

    headers = ("", f"Select-1 Acc@{suffix}", f"Expl.-level AP@{suffix}")
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(3)
    ]
    lines = [
        f"{report.experiment}  (n={report.n_instances} instances, "
        f"{report.n_candidates} explanations)"
    ]
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    if report.agreement_alpha is not None:
        lines.append(f"Krippendorff's alpha: {report.agreement_alpha:.2f}")
    for name, value in sorted(report.extras.items()):
        lines.append(f"{name}: {value:.3f}")
    return "\n".join(lines) + "\n"


def per_item_csv(
    rows: Sequence[Mapping[str, object]],
    fieldnames: Optional[Sequence[str]] = None,
) -> str:
    """Per-item diagnostics as CSV text (instance, selection, labels, scores)."""
    if not rows:
        return ""
    fieldnames = list(fieldnames or rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
