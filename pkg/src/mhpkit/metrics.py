"""Comparing an estimated interaction matrix with a ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import kendalltau

from .core import ValidationError


def _pair(a_star, a_hat):
    a_star = np.asarray(a_star, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    if a_star.ndim != 2 or a_star.shape != a_hat.shape:
        raise ValidationError(f"shape mismatch: {a_star.shape} vs {a_hat.shape}")
    if a_star.size == 0:
        raise ValidationError("matrices are empty")
    return a_star, a_hat


def hamming(a_star, a_hat) -> float:
    """Share of entries whose zero/non-zero status differs."""
    a_star, a_hat = _pair(a_star, a_hat)
    return float(np.mean((a_star != 0) != (a_hat != 0)))


def hamming_values(a_star, a_hat) -> float:
    """Share of entries whose values differ (literal value comparison)."""
    a_star, a_hat = _pair(a_star, a_hat)
    return float(np.mean(a_star != a_hat))


def rel_err(a_star, a_hat) -> float:
    """Mean of ``|a* - a|/|a*|`` on non-zero truth entries and ``|a|`` elsewhere."""
    a_star, a_hat = _pair(a_star, a_hat)
    nz = a_star != 0
    terms = np.abs(a_hat).copy()
    terms[nz] = np.abs(a_star[nz] - a_hat[nz]) / np.abs(a_star[nz])
    return float(np.mean(terms))


def _tau_b(x, y) -> float:
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    tau = kendalltau(x, y, variant="b").statistic
    return 0.0 if np.isnan(tau) else float(tau)


def rank_corr(a_star, a_hat) -> float:
    """Row-averaged Kendall tau-b; a constant row in either matrix contributes 0."""
    a_star, a_hat = _pair(a_star, a_hat)
    if a_star.shape[1] < 2:
        raise ValidationError("rank correlation needs at least two columns")
    return float(np.mean([_tau_b(x, y) for x, y in zip(a_star, a_hat)]))


@dataclass(frozen=True)
class MetricReport:
    hamming: float
    rel_err: float
    rank_corr: float

    def as_row(self) -> dict:
        return {"hamming": self.hamming, "rel_err": self.rel_err, "rank_corr": self.rank_corr}

    def format_table(self) -> str:
        names = ("HammDist", "RelErr", "RankCorr")
        cells = [repr(float(v)) for v in (self.hamming, self.rel_err, self.rank_corr)]
        widths = [max(len(a), len(b)) for a, b in zip(names, cells)]
        head = "  ".join(n.rjust(w) for n, w in zip(names, widths))
        row = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return head + "\n" + row


def evaluate(a_star, a_hat) -> MetricReport:
    return MetricReport(hamming(a_star, a_hat), rel_err(a_star, a_hat), rank_corr(a_star, a_hat))
