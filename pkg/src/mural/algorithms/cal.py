"""Realizable single-distribution active learner (CAL).

Processes a stream of unlabeled draws, asks for a label only when the point
lies in the disagreement region of the current version space, and otherwise
infers the label every surviving hypothesis agrees on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

import numpy as np

from mural.domain import PROB_ATOL, Hypothesis, Instance
from mural.errors import NotRealizableError
from mural.oracles import Oracle, StreamFactory
from mural.regions import Region

logger = logging.getLogger(__name__)


def cal_budget(eps: float, delta: float, d: int) -> int:
    """Unlabeled draws for realizable PAC accuracy eps at confidence delta."""
    return math.ceil(4 / eps * (d * math.log(12 / eps) + math.log(2 / delta)))


@dataclass
class CalResult:
    """Output, label spend and query trace of one CAL run."""

    group: int
    hypothesis: Hypothesis
    budget: int
    label_queries: int
    unlabeled_queries: int
    points: np.ndarray
    queried: np.ndarray
    inferred_labels: np.ndarray

    @property
    def inferred(self) -> int:
        return int((~self.queried).sum())

    @property
    def cumulative_queries(self) -> np.ndarray:
        return np.cumsum(self.queried)

    @property
    def ledger_delta(self) -> Dict[str, int]:
        return {"label_queries": self.label_queries, "unlabeled_queries": self.unlabeled_queries}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "learner": "cal",
            "group": self.group,
            "output_h": self.hypothesis.id,
            "budget": self.budget,
            "budget_rule": "ceil(4/eps * (d ln(12/eps) + ln(2/delta)))",
            "label_queries": self.label_queries,
            "unlabeled_queries": self.unlabeled_queries,
            "inferred": self.inferred,
        }


def run_cal(inst: Instance, g: int, eps: float, delta: float, streams: Union[StreamFactory, int],
            oracle: Optional[Oracle] = None, d: Optional[int] = None) -> CalResult:
    """Learn a zero-error hypothesis for group ``g`` with as few labels as CAL needs."""
    inst.check_group(g)
    if not isinstance(streams, StreamFactory):
        streams = StreamFactory(streams)
    oracle = oracle if oracle is not None else Oracle(inst)
    if inst.loss_matrix[:, g].min() > PROB_ATOL:
        raise NotRealizableError(g, f"best loss is {inst.loss_matrix[:, g].min():.4g}")

    d = d if d is not None else inst.hclass.vc_dim
    budget = cal_budget(eps, delta, d)
    labels_before = oracle.ledger.label_queries[g]
    unlabeled_before = oracle.ledger.unlabeled_queries[g]

    points = oracle.draw_unlabeled_points(g, Region.full(inst.domain.size), budget,
                                          streams.generator("cal-unlabeled", g))
    label_rng = streams.generator("cal-labels", g)
    labels = inst.hclass.labels
    alive = np.arange(inst.hclass.size)
    queried = np.zeros(budget, dtype=bool)
    inferred_labels = np.zeros(budget, dtype=np.int8)

    for t, x in enumerate(points):
        column = labels[alive, x]
        if np.all(column == column[0]):
            inferred_labels[t] = column[0]
            continue
        y = oracle.label_query(g, int(x), label_rng)
        queried[t] = True
        alive = alive[column == y]
        if alive.size == 0:
            raise NotRealizableError(g, f"no hypothesis is consistent after {t + 1} draws")

    result = CalResult(
        group=g,
        hypothesis=inst.hypothesis(int(alive[0])),
        budget=budget,
        label_queries=oracle.ledger.label_queries[g] - labels_before,
        unlabeled_queries=oracle.ledger.unlabeled_queries[g] - unlabeled_before,
        points=points,
        queried=queried,
        inferred_labels=inferred_labels,
    )
    logger.debug("cal group %d: h%d after %d draws, %d labels",
                 g, result.hypothesis.id, budget, result.label_queries)
    return result
