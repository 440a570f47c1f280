"""Multi-group learning by per-group learning plus relabeling.

Each group is first learned on its own. The per-group hypotheses then label
fresh unlabeled samples (no label oracle involved) and the final hypothesis
is the minimax ERM on those relabeled samples.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from mural.algorithms.agnostic import AgnosticConfig, learn_agnostic
from mural.algorithms.cal import run_cal
from mural.baselines import brute_force_optimum, minimax_erm
from mural.domain import PROB_ATOL, Instance
from mural.errors import ContractViolation
from mural.oracles import LabeledSet, Oracle, StreamFactory
from mural.regions import Region
from mural.report import RunReport

logger = logging.getLogger(__name__)

PER_GROUP_SUBSTITUTE = (
    "per-group learner is the agnostic learner run with a single group; "
    "it has the same (eps, delta) guarantee as a dedicated agnostic learner"
)


def relabel_sample_size(eps: float, delta: float, d: int, num_groups: int) -> int:
    """Unlabeled samples per group for the relabeled minimax ERM."""
    return math.ceil(144 / eps ** 2 * (2 * d * math.log(24 / eps) + math.log(8 * num_groups / delta)))


def relabel(counts: np.ndarray, labels: np.ndarray, group: int) -> LabeledSet:
    """Label unlabeled counts with a fixed hypothesis' label vector."""
    counts = np.asarray(counts, dtype=np.int64)
    positives = np.where(labels == 1, counts, 0)
    return LabeledSet(group, positives, counts - positives)


@dataclass
class RelabelOutcome:
    """Minimax ERM output over a relabeled sample, with the sample itself."""

    output_h: int
    sample_size: int
    counts: List[np.ndarray]
    sets: List[LabeledSet]


def relabel_and_select(inst: Instance, oracle: Oracle, learned: Sequence[int], eps: float,
                       delta: float, d: int, streams: StreamFactory) -> RelabelOutcome:
    """Draw unlabeled samples, label them with ``learned[g]`` and run minimax ERM."""
    if len(learned) != inst.num_groups:
        raise ContractViolation("need one learned hypothesis per group")
    n = relabel_sample_size(eps, delta, d, inst.num_groups)
    everywhere = Region.full(inst.domain.size)
    counts, sets = [], []
    for g, h_id in enumerate(learned):
        drawn = oracle.draw_unlabeled_counts(g, everywhere, n, streams.generator("relabel", g))
        counts.append(drawn)
        sets.append(relabel(drawn, inst.hclass.labels[h_id], g))
    return RelabelOutcome(minimax_erm(inst, sets), n, counts, sets)


@dataclass
class DistortionCheck:
    """Per-hypothesis gap between true-label and relabeled empirical losses."""

    group: int
    distortion: np.ndarray
    bound: float

    @property
    def holds(self) -> bool:
        return bool(np.all(self.distortion <= self.bound + PROB_ATOL))


def relabeling_distortion(inst: Instance, g: int, counts: np.ndarray, learned_id: int,
                          rng: np.random.Generator) -> DistortionCheck:
    """Compare relabeled losses against losses on counterfactual true labels.

    The true labels come from an uncharged shadow oracle. For every ``h`` the
    gap is at most the empirical loss of the learned hypothesis on the true
    labels.
    """
    shadow = Oracle(inst).shadow()
    truth = shadow.label_counts(g, counts, rng)
    relabeled = relabel(counts, inst.hclass.labels[learned_id], g)
    n = len(truth)
    if n == 0:
        raise ContractViolation("distortion needs a non-empty sample")
    true_losses = truth.mistakes(inst.hclass.labels) / n
    relabeled_losses = relabeled.mistakes(inst.hclass.labels) / n
    return DistortionCheck(g, np.abs(true_losses - relabeled_losses), float(true_losses[learned_id]))


def _as_streams(streams: Union[StreamFactory, int]) -> StreamFactory:
    return streams if isinstance(streams, StreamFactory) else StreamFactory(streams)


def run_group_realizable(inst: Instance, eps: float, delta: float,
                         streams: Union[StreamFactory, int]) -> RunReport:
    """CAL on every group, then relabeled minimax ERM.

    Every group must be realizable by the class. All label queries happen
    during the per-group phase.
    """
    started = time.perf_counter()
    streams = _as_streams(streams)
    oracle = Oracle(inst)
    G = inst.num_groups
    d = inst.hclass.vc_dim

    results = [run_cal(inst, g, eps / 6, delta / (2 * G), streams.child("cal", g), oracle, d=d)
               for g in range(G)]
    after_learning = oracle.ledger.snapshot()
    outcome = relabel_and_select(inst, oracle, [r.hypothesis.id for r in results], eps, delta, d, streams)
    if oracle.ledger.label_queries != after_learning["label_queries"]:
        raise ContractViolation("relabeling must not query labels")

    report = RunReport.build(
        "group_realizable", inst, outcome.output_h, oracle.ledger, brute_force_optimum(inst),
        config={"eps": eps, "delta": delta, "d": d, "relabel_samples_per_group": outcome.sample_size},
        subreports=[r.to_dict() for r in results],
        diagnostics={"labels_after_learning": after_learning["label_queries"]},
    )
    report.runtime_ms = (time.perf_counter() - started) * 1000
    logger.info("group_realizable: output h%d, excess %.4g, %d labels",
                outcome.output_h, report.excess, report.total_labels)
    return report


def run_approximation(inst: Instance, eps: float, delta: float, streams: Union[StreamFactory, int],
                      constant_scale: float = 1.0) -> RunReport:
    """Agnostic learning per group, then relabeled minimax ERM.

    The excess over the minimax value is only guaranteed to stay below
    ``2 max_g nu_g + eps``; the report records that bound next to the
    realized excess.
    """
    started = time.perf_counter()
    streams = _as_streams(streams)
    oracle = Oracle(inst)
    G = inst.num_groups
    d = inst.hclass.vc_dim
    cfg = AgnosticConfig(eps / 6, delta / (2 * G), constant_scale)

    learned, subreports = [], []
    for g in range(G):
        single = inst.restrict_to_group(g)
        sub_oracle = Oracle(single)
        result = learn_agnostic(single, cfg, streams.child("approx", g), sub_oracle,
                                brute_force_optimum(single))
        oracle.ledger.merge(sub_oracle.ledger, groups=[g])
        learned.append(result.output_h)
        subreports.append({
            "learner": "agnostic",
            "group": g,
            "output_h": result.output_h,
            "true_loss": float(inst.loss_matrix[result.output_h, g]),
            "label_queries": sub_oracle.ledger.total_labels,
            "iterations": result.iterations,
            "traces": [t.to_dict() for t in result.traces],
        })

    outcome = relabel_and_select(inst, oracle, learned, eps, delta, d, streams)
    optimum = brute_force_optimum(inst)
    nu_per_group = [float(v) for v in optimum.nu_per_group]
    bound = 2 * max(nu_per_group) + eps
    report = RunReport.build(
        "approximation", inst, outcome.output_h, oracle.ledger, optimum,
        config={"eps": eps, "delta": delta, "d": d, "constant_scale": constant_scale,
                "relabel_samples_per_group": outcome.sample_size},
        subreports=subreports,
        diagnostics={
            "per_group_learner": PER_GROUP_SUBSTITUTE,
            "nu_per_group": nu_per_group,
            "approximation_bound": bound,
        },
    )
    report.diagnostics["within_approximation_bound"] = bool(report.excess <= bound + PROB_ATOL)
    report.runtime_ms = (time.perf_counter() - started) * 1000
    logger.info("approximation: output h%d, excess %.4g (bound %.4g), %d labels",
                outcome.output_h, report.excess, bound, report.total_labels)
    return report
