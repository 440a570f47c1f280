"""General agnostic multi-group active learner.

Iterative version-space elimination: at iteration ``i`` the learner labels
points inside the disagreement region ``R_i`` of the surviving hypotheses and,
separately, points in its complement, forms two-part loss estimates and keeps
every hypothesis whose worst-group estimate is within ``2^(I-i) * eps / 4`` of
the empirical minimizer.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from mural.baselines import Optimum, brute_force_optimum
from mural.domain import PROB_ATOL, Hypothesis, Instance
from mural.errors import ContractViolation, EmptyVersionSpaceError
from mural.estimation import TwoPartEstimate, estimate_version_space
from mural.oracles import Oracle, StreamFactory
from mural.regions import Region, VersionSpace, disagreement_region
from mural.report import RunReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgnosticConfig:
    """Inputs of the agnostic learner.

    ``constant_scale`` multiplies every sample count; values below 1 void the
    consistency guarantee and exist to keep quick experiments cheap.
    """

    eps: float
    delta: float
    constant_scale: float = 1.0
    d_override: Optional[int] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ContractViolation(f"eps must be positive, got {self.eps}")
        if not 0 < self.delta < 1:
            raise ContractViolation(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.constant_scale <= 1:
            raise ContractViolation(f"constant_scale must lie in (0, 1], got {self.constant_scale}")
        if self.d_override is not None and self.d_override < 1:
            raise ContractViolation(f"d_override must be positive, got {self.d_override}")

    def vc_dim(self, inst: Instance) -> int:
        return self.d_override if self.d_override is not None else inst.hclass.vc_dim

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "delta": self.delta,
            "constant_scale": self.constant_scale,
            "d_override": self.d_override,
        }


@dataclass
class IterationTrace:
    """State of one estimation round."""

    iteration: int
    region: Region
    m_i: float
    region_masses: List[float]
    complement_masses: List[float]
    n_in: int
    n_out: int
    labeled_in: List[int]
    labeled_out: List[int]
    erm_id: int
    threshold: Optional[float]
    survivors: VersionSpace
    excess_bound: float
    hstar_survived: bool
    final: bool = False
    estimates: Dict[int, List[float]] = field(default_factory=dict, repr=False)

    @property
    def version_space_size(self) -> int:
        return len(self.survivors)

    @property
    def labels_charged(self) -> List[int]:
        return [a + b for a, b in zip(self.labeled_in, self.labeled_out)]

    def to_dict(self, include_estimates: bool = False) -> Dict[str, Any]:
        out = {
            "iteration": self.iteration,
            "final": self.final,
            "region": self.region.members().tolist(),
            "m_i": self.m_i,
            "region_masses": self.region_masses,
            "complement_masses": self.complement_masses,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "labeled_in": self.labeled_in,
            "labeled_out": self.labeled_out,
            "erm_id": self.erm_id,
            "threshold": self.threshold,
            "survivors": self.survivors.members().tolist(),
            "version_space_size": self.version_space_size,
            "excess_bound": self.excess_bound,
            "hstar_survived": self.hstar_survived,
        }
        if include_estimates:
            out["estimates"] = {str(h): losses for h, losses in self.estimates.items()}
        return out


@dataclass
class AgnosticResult:
    """Output id, per-round traces, round count and the VC dimension used."""

    output_h: int
    traces: List[IterationTrace]
    iterations: int
    d: int


def iteration_count(eps: float) -> int:
    """Number of elimination rounds, ceil(log2(1/eps)); zero when eps >= 1."""
    if eps >= 1:
        return 0
    return math.ceil(math.log2(1 / eps))


def sample_sizes(cfg: AgnosticConfig, num_groups: int, d: int, iterations: int,
                 i: int, m_i: float) -> Tuple[int, int]:
    """Per-group (inside, outside) sample counts for round ``i``."""
    eps, delta, c = cfg.eps, cfg.delta, cfg.constant_scale
    # the union bound runs over max(I, 1) rounds so the eps >= 1 case stays finite
    rounds = max(iterations, 1)
    scale = eps * 2 ** (iterations - i)
    n_in = c * 1024 * (m_i / scale) ** 2 * (
        2 * d * math.log(64 / eps) + math.log(8 * num_groups * rounds / delta))
    n_out = c * 128 * math.log(4 * num_groups * rounds / delta) / scale ** 2
    return math.ceil(n_in), math.ceil(n_out)


def label_complexity_envelope(num_groups: int, theta: float, d: int, eps: float, delta: float) -> float:
    """Shape of the label-complexity bound for noise-free instances."""
    log_eps = math.log2(1 / eps)
    return (num_groups * theta ** 2 * (d * log_eps + math.log(1 / delta)) * log_eps
            + num_groups * math.log(1 / delta) * log_eps / eps ** 2)


def _estimation_round(inst: Instance, oracle: Oracle, vs: VersionSpace, cfg: AgnosticConfig,
                      d: int, iterations: int, i: int, streams: StreamFactory,
                      ) -> Tuple[TwoPartEstimate, Dict[str, Any]]:
    region = disagreement_region(inst.hclass, vs)
    outside = region.complement()
    inside_masses = [float(inst.marginals[g][region.mask].sum()) for g in range(inst.num_groups)]
    outside_masses = [float(inst.marginals[g][outside.mask].sum()) for g in range(inst.num_groups)]
    m_i = max(inside_masses)
    n_in, n_out = sample_sizes(cfg, inst.num_groups, d, iterations, i, m_i)

    samples = []
    labeled_in, labeled_out = [], []
    for g in range(inst.num_groups):
        s_in = oracle.draw_labeled_set(g, region, n_in, streams.generator("agnostic-in", g, i))
        s_out = oracle.draw_labeled_set(g, outside, n_out, streams.generator("agnostic-out", g, i))
        samples.append((s_in, s_out))
        labeled_in.append(len(s_in))
        labeled_out.append(len(s_out))

    estimate = estimate_version_space(inst, vs, region, samples)
    logger.debug("round %d: |H_i|=%d m_i=%.4f n_in=%d n_out=%d", i, len(vs), m_i, n_in, n_out)
    info = {
        "region": region,
        "m_i": m_i,
        "region_masses": inside_masses,
        "complement_masses": outside_masses,
        "n_in": n_in,
        "n_out": n_out,
        "labeled_in": labeled_in,
        "labeled_out": labeled_out,
    }
    return estimate, info


def learn_agnostic(inst: Instance, cfg: AgnosticConfig, streams: StreamFactory, oracle: Oracle,
                   optimum: Optional[Optimum] = None) -> AgnosticResult:
    """Run the elimination rounds and the final selection round.

    ``optimum`` is only used to annotate traces; it never influences a
    decision of the learner.
    """
    d = cfg.vc_dim(inst)
    iterations = iteration_count(cfg.eps)
    optimal = np.zeros(inst.hclass.size, dtype=bool)
    if optimum is not None:
        optimal[optimum.tied_ids] = True

    vs = VersionSpace.full(inst.hclass.size)
    traces: List[IterationTrace] = []
    for i in range(1, iterations + 1):
        estimate, info = _estimation_round(inst, oracle, vs, cfg, d, iterations, i, streams)
        max_loss = estimate.max_loss()
        erm = estimate.erm()
        threshold = float(max_loss[estimate.hypothesis_ids == erm][0]) + 2 ** (iterations - i) * cfg.eps / 4
        keep = np.zeros(inst.hclass.size, dtype=bool)
        keep[estimate.hypothesis_ids[max_loss <= threshold]] = True
        survivors = vs.restrict(keep)
        traces.append(IterationTrace(
            iteration=i, erm_id=erm, threshold=threshold, survivors=survivors,
            excess_bound=2 ** (iterations - i) * cfg.eps,
            hstar_survived=bool(np.any(optimal & survivors.mask)) if optimum is not None else True,
            estimates=estimate.as_dict(), **info,
        ))
        if survivors.is_empty():
            raise EmptyVersionSpaceError(f"version space emptied in round {i}", traces)
        vs = survivors

    # final selection on R_{I+1} = Delta(H_{I+1}) with the last round's sample sizes
    estimate, info = _estimation_round(inst, oracle, vs, cfg, d, iterations, iterations, streams.child("final"))
    output = estimate.erm()
    traces.append(IterationTrace(
        iteration=iterations + 1, erm_id=output, threshold=None, survivors=vs,
        excess_bound=cfg.eps,
        hstar_survived=bool(np.any(optimal & vs.mask)) if optimum is not None else True,
        final=True, estimates=estimate.as_dict(), **info,
    ))
    return AgnosticResult(output, traces, iterations, d)


def run_agnostic(inst: Instance, cfg: AgnosticConfig, streams: Union[StreamFactory, int],
                 oracle: Optional[Oracle] = None, keep_estimates: bool = False) -> RunReport:
    """Agnostic multi-group active learning; returns a full run report.

    With ``keep_estimates`` every trace also carries the per-group estimate of
    each surviving hypothesis.
    """
    started = time.perf_counter()
    if not isinstance(streams, StreamFactory):
        streams = StreamFactory(streams)
    oracle = oracle if oracle is not None else Oracle(inst)
    optimum = brute_force_optimum(inst)
    result = learn_agnostic(inst, cfg, streams, oracle, optimum)
    config = cfg.to_dict()
    config.update({"d": result.d, "iterations": result.iterations})
    report = RunReport.build(
        "agnostic", inst, result.output_h, oracle.ledger, optimum, config,
        traces=[t.to_dict(keep_estimates) for t in result.traces],
    )
    report.runtime_ms = (time.perf_counter() - started) * 1000
    logger.info("agnostic: output h%d, excess %.4g, %d labels over %d rounds",
                result.output_h, report.excess, report.total_labels, result.iterations)
    return report


@dataclass
class IterationCheck:
    """Exact-loss check of one elimination round's survivors."""

    iteration: int
    hstar_survived: bool
    max_excess: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.max_excess <= self.bound + PROB_ATOL


@dataclass
class LemmaReport:
    """Per-round check of h* survival and the survivors' excess bound."""

    checks: List[IterationCheck]

    @property
    def hstar_always_survived(self) -> bool:
        return all(c.hstar_survived for c in self.checks)

    @property
    def excess_always_bounded(self) -> bool:
        return all(c.within_bound for c in self.checks)

    @property
    def holds(self) -> bool:
        return self.hstar_always_survived and self.excess_always_bounded


def _trace_field(trace: Union[IterationTrace, Dict[str, Any]], name: str):
    if isinstance(trace, dict):
        return trace[name]
    return getattr(trace, name)


def _survivor_ids(trace: Union[IterationTrace, Dict[str, Any]]) -> np.ndarray:
    survivors = _trace_field(trace, "survivors")
    if isinstance(survivors, VersionSpace):
        return survivors.members()
    return np.asarray(survivors, dtype=np.int64)


def check_lemma_invariants(traces: Sequence[Union[IterationTrace, Dict[str, Any]]], inst: Instance,
                           hstar: Union[Hypothesis, int]) -> LemmaReport:
    """Check, with exact losses, that h* survives every elimination round and
    that every survivor of round i is within 2^(I-i) * eps of optimal."""
    hstar_id = hstar.id if isinstance(hstar, Hypothesis) else int(hstar)
    worst = inst.max_loss_vector
    checks = []
    for trace in traces:
        if _trace_field(trace, "final"):
            continue
        ids = _survivor_ids(trace)
        checks.append(IterationCheck(
            iteration=int(_trace_field(trace, "iteration")),
            hstar_survived=bool(hstar_id in ids),
            max_excess=float(np.max(np.abs(worst[ids] - worst[hstar_id]))),
            bound=float(_trace_field(trace, "excess_bound")),
        ))
    return LemmaReport(checks)
