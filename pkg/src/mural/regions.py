"""Disagreement regions, pseudo-metric balls and disagreement coefficients."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, List

import numpy as np

from mural.domain import PROB_ATOL, Hypothesis, HypothesisClass, Instance
from mural.errors import ContractViolation

logger = logging.getLogger(__name__)


class _Membership:
    """Shared behaviour of boolean-mask subsets of an index space."""

    __slots__ = ()
    mask: np.ndarray

    @classmethod
    def from_indices(cls, indices: Iterable[int], size: int):
        mask = np.zeros(size, dtype=bool)
        mask[list(indices)] = True
        return cls(mask)

    @classmethod
    def full(cls, size: int):
        return cls(np.ones(size, dtype=bool))

    @classmethod
    def empty(cls, size: int):
        return cls(np.zeros(size, dtype=bool))

    @property
    def size(self) -> int:
        """Size of the index space, not the number of members."""
        return int(self.mask.shape[0])

    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def is_empty(self) -> bool:
        return not self.mask.any()

    def issubset(self, other) -> bool:
        return bool(np.all(~self.mask | other.mask))

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self) -> Iterator[int]:
        return iter(int(i) for i in self.members())

    def __contains__(self, index: object) -> bool:
        return isinstance(index, (int, np.integer)) and 0 <= index < self.size and bool(self.mask[index])

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return bool(np.array_equal(self.mask, other.mask))

    __hash__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.members().tolist()})"


def _frozen_mask(mask) -> np.ndarray:
    out = np.array(mask, dtype=bool)
    if out.ndim != 1:
        raise ContractViolation("membership mask must be one-dimensional")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False, repr=False)
class Region(_Membership):
    """Subset of domain points."""

    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen_mask(self.mask))

    def complement(self) -> "Region":
        return Region(~self.mask)


@dataclass(frozen=True, eq=False, repr=False)
class VersionSpace(_Membership):
    """Subset of hypothesis ids still in contention."""

    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen_mask(self.mask))

    def representative(self) -> int:
        """Canonical member: the lowest hypothesis id."""
        if self.is_empty():
            raise ContractViolation("empty version space has no representative")
        return int(np.argmax(self.mask))

    def restrict(self, keep: np.ndarray) -> "VersionSpace":
        return VersionSpace(self.mask & keep)


def disagreement_region(hclass: HypothesisClass, vs: VersionSpace) -> Region:
    """Points on which some pair of hypotheses in ``vs`` disagree."""
    if vs.is_empty():
        raise ContractViolation("disagreement region of an empty version space")
    labels = hclass.labels[vs.mask]
    return Region(np.any(labels != labels[0], axis=0))


def rho(inst: Instance, g: int, h1: Hypothesis, h2: Hypothesis):
    """Pseudo-metric: mass under group ``g`` where the two hypotheses differ."""
    inst.check_group(g)
    return inst.groups[g].mass(h1.labels != h2.labels)


def _distances_from(inst: Instance, g: int, center_labels: np.ndarray) -> np.ndarray:
    differs = (inst.hclass.labels != center_labels).astype(np.float64)
    return differs @ inst.marginals[g]


def ball(inst: Instance, g: int, center: Hypothesis, r: float) -> VersionSpace:
    """All hypotheses within rho_g-distance ``r`` of ``center``."""
    inst.check_group(g)
    if r < 0:
        raise ContractViolation(f"ball radius must be non-negative, got {r}")
    return VersionSpace(_distances_from(inst, g, center.labels) <= r + PROB_ATOL)


def _coefficient_for_center(inst: Instance, g: int, center: int, r_min: float) -> float:
    labels = inst.hclass.labels
    differs = labels != labels[center]
    dist = differs.astype(np.float64) @ inst.marginals[g]
    order = np.argsort(dist, kind="stable")
    sorted_dist = dist[order]
    # the center belongs to every ball, so a point is in the disagreement
    # region of a ball iff some member labels it differently from the center
    covered = np.logical_or.accumulate(differs[order], axis=0)
    region_masses = covered.astype(np.float64) @ inst.marginals[g]

    radii = np.unique(np.concatenate(([r_min], sorted_dist[sorted_dist >= r_min])))
    last = np.searchsorted(sorted_dist, radii + PROB_ATOL, side="right") - 1
    return float(np.max(region_masses[last] / radii))


def disagreement_coefficient(inst: Instance, g: int, nu: float, eps: float) -> float:
    """Exact sup over centers and radii r' >= 2*nu + eps of P(Delta(B(h, r'))) / r'.

    The numerator is a right-continuous step function of r', so the supremum
    over radii is attained at r' = 2*nu + eps or at one of the distances from
    the center to another hypothesis.
    """
    inst.check_group(g)
    r_min = 2 * float(nu) + float(eps)
    if r_min <= 0:
        raise ContractViolation("2*nu + eps must be positive")
    if inst.hclass.size == 1:
        return 0.0
    best = 0.0
    for center in range(inst.hclass.size):
        best = max(best, _coefficient_for_center(inst, g, center, r_min))
    logger.debug("theta_%d = %.6f (nu=%.4f, eps=%.4f)", g, best, nu, eps)
    return best


def disagreement_coefficients(inst: Instance, nu: float, eps: float) -> List[float]:
    """Per-group coefficients theta_g at radius floor 2*nu + eps."""
    return [disagreement_coefficient(inst, g, nu, eps) for g in range(inst.num_groups)]


def disagreement_coefficient_max(inst: Instance, nu: float, eps: float) -> float:
    """Maximum of the per-group disagreement coefficients."""
    return max(disagreement_coefficients(inst, nu, eps))


def disagreement_coefficient_grid(inst: Instance, g: int, nu: float, eps: float,
                                  radii: Iterable[float]) -> float:
    """Brute-force disagreement coefficient over a finite grid of radii.

    Radii below 2*nu + eps are ignored. Never exceeds the exact value.
    """
    inst.check_group(g)
    r_min = 2 * float(nu) + float(eps)
    best = 0.0
    for r in radii:
        if r < r_min:
            continue
        for center in inst.hclass:
            region = disagreement_region(inst.hclass, ball(inst, g, center, r))
            best = max(best, float(inst.marginals[g][region.mask].sum()) / r)
    return best
