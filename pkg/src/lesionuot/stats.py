"""One-sided Wilcoxon signed-rank test.

Exact null distribution (with tied midranks) up to ``EXACT_MAX_N`` nonzero
differences, normal approximation with tie correction above. Zero
differences are dropped before ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

EXACT_MAX_N = 25


@dataclass(frozen=True)
class WilcoxonResult:
    n: int
    statistic: Optional[float]
    pvalue: Optional[float]
    method: str

    @property
    def applicable(self) -> bool:
        return self.pvalue is not None


def _exact_upper_tail(doubled_ranks: np.ndarray, observed: int) -> float:
    """P(sum of a random signed subset of ranks >= observed), all ranks doubled to integers."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled_ranks.astype(int):
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return float(counts[observed:].sum() / counts.sum())


def wilcoxon_greater(x, y, min_n: int = 2) -> WilcoxonResult:
    """Test whether ``x`` tends to exceed ``y`` on paired samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("wilcoxon_greater needs two 1-D samples of equal length")
    if x.size < min_n:
        return WilcoxonResult(int(x.size), None, None, "n/a")
    d = x - y
    d = d[d != 0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0, 0.0, 1.0, "exact")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(int)
        return WilcoxonResult(n, w_plus, _exact_upper_tail(doubled, int(round(2 * w_plus))), "exact")
    _, tie_counts = np.unique(ranks, return_counts=True)
    mean = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24 - float((tie_counts**3 - tie_counts).sum()) / 48
    z = (w_plus - mean) / math.sqrt(var)
    return WilcoxonResult(n, w_plus, 0.5 * math.erfc(z / math.sqrt(2)), "normal")
