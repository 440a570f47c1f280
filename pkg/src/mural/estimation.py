"""Empirical loss estimators and their concentration function.

The two-part estimator splits a group's loss between a region ``R`` (where
the version space may disagree) and its complement (where it agrees):

    L_{S;R}(h|g) = P_g(R) * L_{S_in}(h) + P_g(R^c) * L_{S_out}(h_rep)

``h_rep`` is the lowest-id member of the version space and its second term is
shared by every hypothesis. Empty samples have loss 1; with the zero-mass
sampling convention their weight is always 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from mural.domain import Hypothesis, Instance, region_mass
from mural.errors import ContractViolation
from mural.oracles import LabeledSet, Sample
from mural.regions import Region, VersionSpace

logger = logging.getLogger(__name__)

EMPTY_SAMPLE_LOSS = 1.0

Samples = Union[LabeledSet, Sequence[Sample]]
SamplePair = Tuple[Samples, Samples]


def empirical_loss(h: Hypothesis, samples: Samples) -> float:
    """Mean 0-1 loss of ``h`` on ``samples``; 1 on the empty sample."""
    if isinstance(samples, LabeledSet):
        n = len(samples)
        if n == 0:
            return EMPTY_SAMPLE_LOSS
        return float(samples.mistakes(h.labels)[0]) / n
    samples = list(samples)
    if not samples:
        return EMPTY_SAMPLE_LOSS
    wrong = sum(1 for s in samples if h(s.point) != s.label)
    return wrong / len(samples)


def _empirical_losses(labels: np.ndarray, samples: Samples) -> np.ndarray:
    if not isinstance(samples, LabeledSet):
        samples = LabeledSet.from_samples(samples, labels.shape[1])
    n = len(samples)
    if n == 0:
        return np.full(labels.shape[0], EMPTY_SAMPLE_LOSS)
    return samples.mistakes(labels) / n


@dataclass(frozen=True, eq=False)
class TwoPartEstimate:
    """Two-part loss estimates for every member of a version space.

    ``per_group[g, k]`` is the estimate for hypothesis ``hypothesis_ids[k]``
    on group ``g``.
    """

    hypothesis_ids: np.ndarray
    per_group: np.ndarray
    region: Region
    representative: int

    def max_loss(self) -> np.ndarray:
        return self.per_group.max(axis=0)

    def erm(self) -> int:
        """Minimizer of the max-over-groups estimate, ties to the lowest id."""
        return int(self.hypothesis_ids[int(np.argmin(self.max_loss()))])

    def loss_of(self, h_id: int) -> np.ndarray:
        positions = np.flatnonzero(self.hypothesis_ids == h_id)
        if positions.size == 0:
            raise ContractViolation(f"hypothesis {h_id} is not in the estimated version space")
        return self.per_group[:, positions[0]]

    def as_dict(self) -> dict:
        return {int(h): self.per_group[:, k].tolist() for k, h in enumerate(self.hypothesis_ids)}


def two_part_loss(inst: Instance, g: int, h: Hypothesis, vs: VersionSpace, region: Region,
                  s_in: Samples, s_out: Samples) -> float:
    """Two-part estimate of the loss of ``h`` on group ``g``."""
    if h.id not in vs:
        raise ContractViolation(f"hypothesis {h.id} is outside the version space")
    rep = inst.hypothesis(vs.representative())
    inside = region_mass(inst, g, region)
    outside = region_mass(inst, g, region.complement())
    return float(inside * empirical_loss(h, s_in) + outside * empirical_loss(rep, s_out))


def max_loss_estimate(inst: Instance, h: Hypothesis, vs: VersionSpace, region: Region,
                      samples_by_group: Sequence[SamplePair]) -> float:
    """Max over groups of the two-part estimate."""
    return max(
        two_part_loss(inst, g, h, vs, region, s_in, s_out)
        for g, (s_in, s_out) in enumerate(samples_by_group)
    )


def estimate_version_space(inst: Instance, vs: VersionSpace, region: Region,
                           samples_by_group: Sequence[SamplePair]) -> TwoPartEstimate:
    """Vectorized two-part estimates for all members of ``vs`` and all groups."""
    if len(samples_by_group) != inst.num_groups:
        raise ContractViolation("need one (inside, outside) sample pair per group")
    ids = vs.members()
    rep = vs.representative()
    labels = inst.hclass.labels
    members = labels[ids]
    mask = region.mask
    per_group = np.empty((inst.num_groups, ids.shape[0]))
    for g, (s_in, s_out) in enumerate(samples_by_group):
        marginal = inst.marginals[g]
        inside = marginal[mask].sum()
        outside = marginal[~mask].sum()
        shared = _empirical_losses(labels[rep:rep + 1], s_out)[0]
        per_group[g] = inside * _empirical_losses(members, s_in) + outside * shared
    return TwoPartEstimate(ids, per_group, region, rep)


def gamma_bound(delta: float, region_mass_g: float, complement_mass_g: float,
                d: int, m: float, m_prime: float) -> float:
    """Deviation bound of the two-part estimator for one group.

    Both masses positive: P(R)(1/m + sqrt((ln(8/delta) + d ln(2em/d))/m))
    + sqrt(ln(4/delta)/(2m')); complement mass zero keeps the first term,
    region mass zero keeps the second.
    """
    if region_mass_g <= 0 and complement_mass_g <= 0:
        raise ContractViolation("region and complement cannot both have zero mass")
    if not 0 < delta < 1:
        raise ContractViolation(f"delta must lie in (0, 1), got {delta}")

    def uniform_term() -> float:
        if m <= 0:
            raise ContractViolation("m must be positive when the region has mass")
        inner = (math.log(8 / delta) + d * math.log(2 * math.e * m / d)) / m
        return 1 / m + math.sqrt(max(inner, 0.0))

    def agreement_term() -> float:
        if m_prime <= 0:
            raise ContractViolation("m' must be positive when the complement has mass")
        return math.sqrt(math.log(4 / delta) / (2 * m_prime))

    if complement_mass_g <= 0:
        return uniform_term()
    if region_mass_g <= 0:
        return agreement_term()
    return float(region_mass_g) * uniform_term() + agreement_term()


def lemma_sample_sizes(gamma: float, delta: float, d: int, region_mass_g: float) -> Tuple[int, int]:
    """Sample sizes (m, m') that make the deviation bound smaller than ``gamma``."""
    m = 16 * region_mass_g ** 2 / gamma ** 2 * (2 * d * math.log(8 / gamma) + math.log(8 / delta))
    m_prime = 2 * math.log(4 / delta) / gamma ** 2
    return max(1, math.ceil(m)), max(1, math.ceil(m_prime))


def group_gammas(inst: Instance, region: Region, delta: float, d: int,
                 sizes: Iterable[Tuple[float, float]]) -> List[float]:
    """Per-group deviation bounds for the given (m, m') pairs."""
    out = []
    for g, (m, m_prime) in enumerate(sizes):
        inside = float(inst.marginals[g][region.mask].sum())
        outside = float(inst.marginals[g][~region.mask].sum())
        out.append(gamma_bound(delta, inside, outside, d, m, m_prime))
    return out
