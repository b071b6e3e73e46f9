"""Krippendorff's alpha for inter-annotator agreement.

alpha = 1 - D_o / D_e over a units x raters matrix with missing entries.
Observed disagreement D_o comes from the coincidence matrix (each ordered
pair of values within a unit contributes 1/(m_u - 1)); expected disagreement
D_e treats all recorded values as one pool, paired without replacement.
Supports the nominal difference (0/1) and the interval difference
((c - k)^2) used for scores coded on [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

SCALES = ("nominal", "interval")


@dataclass(frozen=True)
class AgreementReport:
    alpha: Optional[float]  # None when undefined (no expected disagreement)
    n_items: int
    n_raters: int
    scale: str

    @property
    def defined(self) -> bool:
        return self.alpha is not None


def _difference(scale: str, c, k) -> float:
    if scale == "nominal":
        return 0.0 if c == k else 1.0
    return (float(c) - float(k)) ** 2


def krippendorff_alpha(
    data: Sequence[Sequence[Optional[Hashable]]],
    scale: str = "nominal",
) -> AgreementReport:
    """Agreement over ``data`` (rows = items, columns = raters, None = missing).

    Items with fewer than two recorded values are ignored pairwise. Degenerate
    data (every recorded value identical) has no chance disagreement, so alpha
    is reported as undefined rather than 1.0.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}")
    units = [[v for v in row if v is not None] for row in data]
    units = [u for u in units if len(u) >= 2]
    if len(units) < 2:
        raise ValueError("need at least 2 items with at least 2 ratings each")

    n_raters = max(len(row) for row in data)

    # value domain and per-category totals
    values: list = sorted({v for u in units for v in u}, key=lambda v: (str(type(v)), str(v)))
    index = {v: i for i, v in enumerate(values)}
    k = len(values)

    coincidence = [[0.0] * k for _ in range(k)]
    for u in units:
        m = len(u)
        for a in range(m):
            for b in range(m):
                if a != b:
                    coincidence[index[u[a]]][index[u[b]]] += 1.0 / (m - 1)

    n_c = [sum(coincidence[c]) for c in range(k)]
    n_total = sum(n_c)

    d_o = 0.0
    d_e = 0.0
    for c in range(k):
        for j in range(k):
            delta = _difference(scale, values[c], values[j])
            d_o += coincidence[c][j] * delta
            d_e += n_c[c] * n_c[j] * delta
    d_o /= n_total
    d_e /= n_total * (n_total - 1)

    if d_e == 0.0:
        return AgreementReport(alpha=None, n_items=len(units), n_raters=n_raters, scale=scale)
    return AgreementReport(
        alpha=1.0 - d_o / d_e,
        n_items=len(units),
        n_raters=n_raters,
        scale=scale,
    )
