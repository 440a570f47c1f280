"""Pairing of active-learner reports with passive-baseline reports."""

from __future__ import annotations

import glob
import json
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from mural.errors import ContractViolation, ReportMismatchError
from mural.report import RunReport

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = [
    "scenario", "eps", "seed", "algorithm", "active_labels", "passive_labels",
    "ratio", "active_excess", "passive_excess",
]

PairKey = Tuple[str, float, int]


@dataclass(frozen=True)
class ComparisonRow:
    """One active run next to the passive run of the same scenario, eps and seed."""

    scenario: str
    eps: float
    seed: int
    algorithm: str
    active_labels: int
    passive_labels: int
    active_excess: float
    passive_excess: float

    @property
    def ratio(self) -> float:
        return self.active_labels / self.passive_labels if self.passive_labels else float("inf")

    def as_row(self) -> List[object]:
        return [self.scenario, f"{self.eps:g}", self.seed, self.algorithm, self.active_labels,
                self.passive_labels, repr(self.ratio), repr(self.active_excess), repr(self.passive_excess)]


def load_reports(patterns: Iterable[str]) -> List[RunReport]:
    """Load every report file matched by the given paths or glob patterns."""
    paths = sorted({p for pattern in patterns for p in (glob.glob(pattern) or [pattern])})
    reports = []
    for path in paths:
        try:
            with open(path, "r", encoding="utf-8") as f:
                reports.append(RunReport.from_dict(json.load(f)))
        except (OSError, ValueError) as err:
            raise ContractViolation(f"{path}: not a run report ({err})") from err
    return reports


def _scenario_key(report: RunReport) -> str:
    if report.scenario is None:
        return report.instance
    return f"{report.scenario['name']}{json.dumps(report.scenario.get('params', {}), sort_keys=True)}"


def _key(report: RunReport) -> PairKey:
    return _scenario_key(report), float(report.config["eps"]), int(report.config.get("seed", 0))


def _describe(key: PairKey) -> str:
    return f"{key[0]} eps={key[1]:g} seed={key[2]}"


def compare_reports(reports: Sequence[RunReport]) -> List[ComparisonRow]:
    """Pair each active report with the passive report of the same scenario,
    eps and seed."""
    passive: Dict[PairKey, RunReport] = {}
    active: Dict[str, Dict[PairKey, RunReport]] = {}
    for report in reports:
        if report.algorithm == "passive":
            passive[_key(report)] = report
        else:
            active.setdefault(report.algorithm, {})[_key(report)] = report
    if not passive or not active:
        raise ReportMismatchError("comparison needs both passive and active reports")

    rows, offenders = [], set()
    for algorithm, by_key in sorted(active.items()):
        missing = set(by_key) ^ set(passive)
        offenders.update(f"{algorithm}: {_describe(k)}" for k in missing)
        for key in sorted(set(by_key) & set(passive)):
            a, p = by_key[key], passive[key]
            rows.append(ComparisonRow(key[0], key[1], key[2], algorithm, a.total_labels, p.total_labels,
                                      a.excess, p.excess))
    if offenders:
        raise ReportMismatchError("unpaired reports", offenders)
    logger.info("paired %d reports", len(rows))
    return rows
