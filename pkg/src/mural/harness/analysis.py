"""Summaries of experiment results: envelope fits, scaling ratios and
seed success rates."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np
from scipy import stats

from mural.errors import ContractViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvelopeFit:
    """Least-squares fit labels ~ alpha + beta * envelope."""

    alpha: float
    beta: float
    r_squared: float


def fit_envelope(envelope: Sequence[float], labels: Sequence[float]) -> EnvelopeFit:
    """Least-squares fit of labels = alpha + beta * envelope."""
    envelope = np.asarray(envelope, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if envelope.shape != labels.shape or envelope.size < 3:
        raise ContractViolation("envelope fit needs at least three paired points")
    fit = stats.linregress(envelope, labels)
    return EnvelopeFit(float(fit.intercept), float(fit.slope), float(fit.rvalue ** 2))


def scaling_ratio(numerator: Iterable[float], denominator: Iterable[float]) -> float:
    """Ratio of the medians of two sets of label totals."""
    top = np.median(np.asarray(list(numerator), dtype=np.float64))
    bottom = np.median(np.asarray(list(denominator), dtype=np.float64))
    if bottom <= 0:
        raise ContractViolation("scaling ratio needs a positive denominator")
    return float(top / bottom)


@dataclass(frozen=True)
class SuccessRate:
    """Hit rate with an exact binomial confidence interval."""

    successes: int
    trials: int
    low: float
    high: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials


def success_rate(successes: int, trials: int, confidence: float = 0.95) -> SuccessRate:
    """Observed success fraction with an exact binomial confidence interval."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ContractViolation(f"cannot rate {successes} successes in {trials} trials")
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence)
    return SuccessRate(successes, trials, float(ci.low), float(ci.high))


@dataclass(frozen=True)
class CellSummary:
    """Median labels and success rate of one (algorithm, eps) group of runs."""

    algorithm: str
    eps: float
    median_labels: float
    success: SuccessRate


def summarize(rows: Sequence[Mapping[str, str]]) -> List[CellSummary]:
    """Median label totals and success rates per (algorithm, eps) from CSV rows."""
    grouped: Dict[Tuple[str, float], List[Mapping[str, str]]] = defaultdict(list)
    for row in rows:
        grouped[(row["algorithm"], float(row["eps"]))].append(row)
    out = []
    for (algorithm, eps), members in sorted(grouped.items()):
        labels = [float(r["total_labels"]) for r in members]
        hits = sum(1 for r in members if r["status"] == "ok")
        out.append(CellSummary(algorithm, eps, float(np.median(labels)), success_rate(hits, len(members))))
    return out
