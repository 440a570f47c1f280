"""Ground truth and the passive comparison learner."""

from __future__ import annotations

import logging
import math
import time
from typing import List, NamedTuple, Union

import numpy as np

from mural.domain import PROB_ATOL, Hypothesis, Instance, Probability, true_group_loss
from mural.oracles import LabeledSet, Oracle, StreamFactory
from mural.regions import Region
from mural.report import RunReport

logger = logging.getLogger(__name__)


class Optimum(NamedTuple):
    """Minimax-optimal hypothesis, nu, per-group optima nu_g and all tied ids."""

    hypothesis: Hypothesis
    nu: Probability
    nu_per_group: List[Probability]
    tied_ids: List[int]

    @property
    def id(self) -> int:
        return self.hypothesis.id


def brute_force_optimum(inst: Instance) -> Optimum:
    """Exhaustive minimax ERM over the true losses; ties go to the lowest id."""
    if inst.is_exact:
        losses = [[true_group_loss(inst, h, g) for g in range(inst.num_groups)] for h in inst.hclass]
        worst = [max(row) for row in losses]
        nu = min(worst)
        tied = [i for i, value in enumerate(worst) if value == nu]
        nu_g = [min(row[g] for row in losses) for g in range(inst.num_groups)]
    else:
        worst = inst.max_loss_vector
        nu = float(worst.min())
        tied = [int(i) for i in np.flatnonzero(worst <= nu + PROB_ATOL)]
        nu_g = [float(v) for v in inst.loss_matrix.min(axis=0)]
    if len(tied) > 1:
        logger.debug("%d minimax-optimal hypotheses tie at nu=%s", len(tied), nu)
    return Optimum(inst.hypothesis(tied[0]), nu, nu_g, tied)


def minimax_erm(inst: Instance, sets: List[LabeledSet]) -> int:
    """argmin_h max_g empirical loss over one labeled set per group."""
    labels = inst.hclass.labels
    worst = np.zeros(inst.hclass.size)
    for labeled in sets:
        n = len(labeled)
        losses = labeled.mistakes(labels) / n if n else np.ones(inst.hclass.size)
        worst = np.maximum(worst, losses)
    return int(np.argmin(worst))


def passive_sample_size(eps: float, delta: float, d: int, num_groups: int) -> int:
    """Labeled samples per group for uniform convergence at (eps/2, delta/2G)."""
    return math.ceil(8 / eps ** 2 * (2 * d * math.log(13 / eps) + math.log(4 * num_groups / delta)))


def run_passive(inst: Instance, eps: float, delta: float, streams: Union[StreamFactory, int]) -> RunReport:
    """Uniform per-group labeled sampling followed by minimax ERM."""
    started = time.perf_counter()
    if not isinstance(streams, StreamFactory):
        streams = StreamFactory(streams)
    oracle = Oracle(inst)
    d = inst.hclass.vc_dim
    n = passive_sample_size(eps, delta, d, inst.num_groups)
    everywhere = Region.full(inst.domain.size)
    sets = [oracle.draw_labeled_set(g, everywhere, n, streams.generator("passive", g))
            for g in range(inst.num_groups)]
    output = minimax_erm(inst, sets)
    report = RunReport.build(
        "passive", inst, output, oracle.ledger, brute_force_optimum(inst),
        config={"eps": eps, "delta": delta, "d": d, "samples_per_group": n,
                "sample_size_rule": "ceil(8/eps^2 * (2d ln(13/eps) + ln(4G/delta)))"},
    )
    report.runtime_ms = (time.perf_counter() - started) * 1000
    logger.info("passive: output h%d, excess %.4g, %d labels", output, report.excess, report.total_labels)
    return report
