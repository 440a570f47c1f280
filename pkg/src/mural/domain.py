"""Finite learning instances: domains, group distributions and hypotheses.

Every probability in this module is computed exactly from finite pmfs. When a
group distribution is built from ``fractions.Fraction`` values the arrays keep
an ``object`` dtype and losses and masses come back as exact fractions; float
inputs give float results.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from mural.errors import ContractViolation

logger = logging.getLogger(__name__)

PROB_ATOL = 1e-12

Probability = Union[float, Fraction]


def _as_probability_array(values: Iterable) -> np.ndarray:
    """Build a read-only array, exact when any entry is a Fraction."""
    values = list(values)
    if any(isinstance(v, Fraction) for v in values):
        arr = np.empty(len(values), dtype=object)
        arr[:] = [Fraction(v) for v in values]
    else:
        arr = np.asarray(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def as_mask(region: Any) -> np.ndarray:
    """Boolean membership mask of a Region or of anything array-like."""
    return np.asarray(getattr(region, "mask", region), dtype=bool)


def default_vc_dim(num_hypotheses: int) -> int:
    """Upper bound on the VC dimension of an arbitrary finite class."""
    return max(1, math.ceil(math.log2(max(num_hypotheses, 1))))


@dataclass(frozen=True)
class FiniteDomain:
    """Instance space with dense point indices ``0..size-1``."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ContractViolation(f"domain needs at least one point, got {self.size}")

    @property
    def points(self) -> range:
        return range(self.size)

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True, eq=False)
class GroupDistribution:
    """Marginal pmf over the domain plus the conditional P(Y=+1 | X=x)."""

    marginal: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        marginal = _as_probability_array(self.marginal)
        eta = _as_probability_array(self.eta)
        if marginal.shape != eta.shape:
            raise ContractViolation(
                f"marginal has {marginal.shape[0]} entries but eta has {eta.shape[0]}"
            )
        if np.any(marginal < 0):
            raise ContractViolation("marginal has negative entries")
        if abs(float(marginal.sum()) - 1.0) > PROB_ATOL:
            raise ContractViolation(f"marginal sums to {float(marginal.sum())!r}, not 1")
        if np.any(eta < 0) or np.any(eta > 1):
            raise ContractViolation("eta entries must lie in [0, 1]")
        object.__setattr__(self, "marginal", marginal)
        object.__setattr__(self, "eta", eta)

    @property
    def size(self) -> int:
        return int(self.marginal.shape[0])

    @property
    def is_exact(self) -> bool:
        return self.marginal.dtype == object or self.eta.dtype == object

    @cached_property
    def support(self) -> np.ndarray:
        return np.asarray(self.marginal > 0, dtype=bool)

    def mass(self, region: Any) -> Probability:
        """Exact mass of a region (mask or Region)."""
        total = self.marginal[as_mask(region)].sum()
        if self.is_exact:
            return Fraction(total)
        return float(total)

    def loss(self, labels: np.ndarray, region: Any = None) -> Probability:
        """Probability of a mistake, optionally jointly with landing in ``region``."""
        err = np.where(np.asarray(labels) == 1, 1 - self.eta, self.eta)
        weighted = self.marginal * err
        if region is not None:
            weighted = weighted[as_mask(region)]
        total = weighted.sum()
        if self.is_exact:
            return Fraction(total)
        return float(total)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupDistribution):
            return NotImplemented
        return bool(np.array_equal(self.marginal, other.marginal)
                    and np.array_equal(self.eta, other.eta))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """A classifier materialized as its label vector over the domain."""

    id: int
    labels: np.ndarray

    def __call__(self, x: int) -> int:
        return int(self.labels[x])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hypothesis):
            return NotImplemented
        return self.id == other.id and bool(np.array_equal(self.labels, other.labels))

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"Hypothesis(id={self.id}, size={self.labels.shape[0]})"


class HypothesisClass:
    """Indexed finite hypothesis class.

    Duplicate label vectors collapse onto the id of their first occurrence.
    """

    def __init__(self, label_vectors: Iterable[Sequence[int]], vc_dim: Optional[int] = None):
        rows: List[np.ndarray] = []
        seen: Dict[bytes, int] = {}
        for vector in label_vectors:
            row = np.asarray(vector, dtype=np.int8)
            if row.ndim != 1:
                raise ContractViolation("each hypothesis must be a flat label vector")
            if not np.all((row == 1) | (row == -1)):
                raise ContractViolation("hypothesis labels must be -1 or +1")
            key = row.tobytes()
            if key in seen:
                continue
            seen[key] = len(rows)
            rows.append(row)
        if not rows:
            raise ContractViolation("hypothesis class must be non-empty")
        if len({row.shape[0] for row in rows}) != 1:
            raise ContractViolation("all label vectors must have the same length")
        self.labels = np.vstack(rows)
        self.labels.setflags(write=False)
        if vc_dim is None:
            vc_dim = default_vc_dim(len(rows))
        if vc_dim < 1:
            raise ContractViolation(f"vc_dim must be positive, got {vc_dim}")
        self.vc_dim = int(vc_dim)

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    @property
    def domain_size(self) -> int:
        return int(self.labels.shape[1])

    @cached_property
    def positive(self) -> np.ndarray:
        """Float indicator of h(x) = +1, shaped (|H|, |X|)."""
        return (self.labels == 1).astype(np.float64)

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, h_id: int) -> Hypothesis:
        if not 0 <= h_id < self.size:
            raise ContractViolation(f"hypothesis id {h_id} out of range")
        return Hypothesis(int(h_id), self.labels[h_id])

    def __iter__(self) -> Iterator[Hypothesis]:
        return (self[i] for i in range(self.size))


@dataclass(frozen=True, eq=False)
class Instance:
    """The whole learning problem: domain, groups and hypothesis class."""

    domain: FiniteDomain
    groups: Tuple[GroupDistribution, ...]
    hclass: HypothesisClass
    name: str = "instance"

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise ContractViolation("an instance needs at least one group")
        for g, dist in enumerate(groups):
            if dist.size != self.domain.size:
                raise ContractViolation(
                    f"group {g} is defined over {dist.size} points, domain has {self.domain.size}"
                )
        if self.hclass.domain_size != self.domain.size:
            raise ContractViolation(
                f"hypotheses label {self.hclass.domain_size} points, domain has {self.domain.size}"
            )
        object.__setattr__(self, "groups", groups)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def is_exact(self) -> bool:
        return any(dist.is_exact for dist in self.groups)

    @cached_property
    def marginals(self) -> np.ndarray:
        """Float marginals shaped (G, |X|)."""
        out = np.vstack([np.asarray(d.marginal, dtype=np.float64) for d in self.groups])
        out.setflags(write=False)
        return out

    @cached_property
    def etas(self) -> np.ndarray:
        out = np.vstack([np.asarray(d.eta, dtype=np.float64) for d in self.groups])
        out.setflags(write=False)
        return out

    @cached_property
    def loss_matrix(self) -> np.ndarray:
        """Float true losses L(h|g) for every hypothesis, shaped (|H|, G)."""
        pos = self.hclass.positive
        neg = 1.0 - pos
        wrong_if_pos = self.marginals * (1.0 - self.etas)
        wrong_if_neg = self.marginals * self.etas
        out = pos @ wrong_if_pos.T + neg @ wrong_if_neg.T
        out.setflags(write=False)
        return out

    @cached_property
    def max_loss_vector(self) -> np.ndarray:
        return self.loss_matrix.max(axis=1)

    def hypothesis(self, h_id: int) -> Hypothesis:
        return self.hclass[h_id]

    def check_group(self, g: int) -> None:
        if not 0 <= g < self.num_groups:
            raise ContractViolation(f"group index {g} out of range for {self.num_groups} groups")

    def restrict_to_group(self, g: int) -> "Instance":
        """Single-group instance over the same domain and class."""
        self.check_group(g)
        return Instance(self.domain, (self.groups[g],), self.hclass, name=f"{self.name}[g={g}]")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "domain_size": self.domain.size,
            "groups": [
                {
                    "marginal": [float(p) for p in dist.marginal],
                    "eta": [float(e) for e in dist.eta],
                }
                for dist in self.groups
            ],
            "hypotheses": self.hclass.labels.astype(int).tolist(),
            "vc_dim": self.hclass.vc_dim,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Instance":
        try:
            domain = FiniteDomain(int(data["domain_size"]))
            groups = tuple(
                GroupDistribution(np.asarray(g["marginal"], dtype=np.float64),
                                  np.asarray(g["eta"], dtype=np.float64))
                for g in data["groups"]
            )
            hclass = HypothesisClass(data["hypotheses"], vc_dim=data.get("vc_dim"))
        except KeyError as err:
            raise ContractViolation(f"instance JSON is missing key {err}") from err
        return cls(domain, groups, hclass, name=data.get("name", "instance"))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


def true_group_loss(inst: Instance, h: Hypothesis, g: int) -> Probability:
    """Exact error of ``h`` on group ``g``: P_{D_g}(h(x) != y)."""
    inst.check_group(g)
    return inst.groups[g].loss(h.labels)


def true_max_loss(inst: Instance, h: Hypothesis) -> Probability:
    """Worst-group exact error of ``h``."""
    return max(inst.groups[g].loss(h.labels) for g in range(inst.num_groups))


def region_mass(inst: Instance, g: int, region: Any) -> Probability:
    """Exact mass of ``region`` under the marginal of group ``g``."""
    inst.check_group(g)
    mask = as_mask(region)
    if mask.shape != (inst.domain.size,):
        raise ContractViolation("region is not defined over the instance domain")
    return inst.groups[g].mass(mask)


def conditional_loss(inst: Instance, h: Hypothesis, g: int, region: Any) -> Probability:
    """Error of ``h`` on group ``g`` conditioned on ``region``; 0 on a zero-mass region."""
    mass = region_mass(inst, g, region)
    if mass == 0:
        return mass
    return inst.groups[g].loss(h.labels, as_mask(region)) / mass


def is_group_realizable(inst: Instance) -> bool:
    """True when every group has some zero-error hypothesis in the class."""
    return bool(np.all(inst.loss_matrix.min(axis=0) <= PROB_ATOL))
