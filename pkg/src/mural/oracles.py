"""Sampling oracles U_g and O_g with seeded streams and query accounting.

``U_g(S)`` returns an unlabeled point from group ``g`` conditioned on the
region ``S`` (or ``None`` when ``S`` has zero mass) and ``O_g(x)`` returns a
+/-1 label drawn with P(+1) = eta_g(x). Batched draws are kept as per-point
counts (see :class:`LabeledSet`), which is distributionally identical to the
same number of independent single draws.
"""

from __future__ import annotations

import logging
import threading
import zlib
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from mural.domain import Instance, as_mask
from mural.errors import ContractViolation

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


class QueryLedger:
    """Per-group counts of label-oracle and unlabeled-oracle calls."""

    def __init__(self, num_groups: int):
        self.label_queries = [0] * num_groups
        self.unlabeled_queries = [0] * num_groups
        self._lock = threading.Lock()

    @property
    def num_groups(self) -> int:
        return len(self.label_queries)

    @property
    def total_labels(self) -> int:
        """Label complexity: total O_g calls over all groups."""
        return sum(self.label_queries)

    @property
    def total_unlabeled(self) -> int:
        return sum(self.unlabeled_queries)

    def charge_labels(self, g: int, n: int = 1) -> None:
        if n < 0:
            raise ContractViolation("ledger counts never decrease")
        with self._lock:
            self.label_queries[g] += int(n)

    def charge_unlabeled(self, g: int, n: int = 1) -> None:
        if n < 0:
            raise ContractViolation("ledger counts never decrease")
        with self._lock:
            self.unlabeled_queries[g] += int(n)

    def merge(self, other: "QueryLedger", groups: Optional[Sequence[int]] = None) -> None:
        """Add another ledger's counts; ``groups[k]`` maps its group k onto ours."""
        if groups is None:
            groups = range(other.num_groups)
        with self._lock:
            for k, g in enumerate(groups):
                self.label_queries[g] += other.label_queries[k]
                self.unlabeled_queries[g] += other.unlabeled_queries[k]

    def snapshot(self) -> Dict[str, List[int]]:
        with self._lock:
            return {
                "label_queries": list(self.label_queries),
                "unlabeled_queries": list(self.unlabeled_queries),
            }

    @classmethod
    def from_snapshot(cls, data: Dict[str, List[int]]) -> "QueryLedger":
        ledger = cls(len(data["label_queries"]))
        ledger.label_queries = [int(n) for n in data["label_queries"]]
        ledger.unlabeled_queries = [int(n) for n in data["unlabeled_queries"]]
        return ledger

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"QueryLedger(labels={self.label_queries}, unlabeled={self.unlabeled_queries})"


@dataclass(frozen=True)
class Sample:
    """One oracle draw; ``label`` is set iff O_g was asked about ``point``."""

    point: int
    label: Optional[int]
    group: int


@dataclass(frozen=True, eq=False)
class LabeledSet:
    """Labeled sample stored as per-point counts of +1 and -1 labels."""

    group: int
    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positives, dtype=np.int64)
        neg = np.asarray(self.negatives, dtype=np.int64)
        if pos.shape != neg.shape:
            raise ContractViolation("positive and negative counts must align")
        pos.setflags(write=False)
        neg.setflags(write=False)
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)

    @classmethod
    def empty(cls, group: int, domain_size: int) -> "LabeledSet":
        zeros = np.zeros(domain_size, dtype=np.int64)
        return cls(group, zeros, zeros)

    @classmethod
    def from_samples(cls, samples: Iterable[Sample], domain_size: int, group: int = 0) -> "LabeledSet":
        pos = np.zeros(domain_size, dtype=np.int64)
        neg = np.zeros(domain_size, dtype=np.int64)
        for sample in samples:
            if sample.label is None:
                raise ContractViolation(f"sample at point {sample.point} carries no label")
            if sample.label == 1:
                pos[sample.point] += 1
            else:
                neg[sample.point] += 1
            group = sample.group
        return cls(group, pos, neg)

    @property
    def counts(self) -> np.ndarray:
        return self.positives + self.negatives

    def __len__(self) -> int:
        return int(self.positives.sum() + self.negatives.sum())

    def __bool__(self) -> bool:
        return len(self) > 0

    def __iter__(self) -> Iterator[Sample]:
        for x in np.flatnonzero(self.counts):
            for _ in range(int(self.positives[x])):
                yield Sample(int(x), 1, self.group)
            for _ in range(int(self.negatives[x])):
                yield Sample(int(x), -1, self.group)

    def mistakes(self, labels: np.ndarray) -> np.ndarray:
        """Number of misclassified samples for each row of a label matrix."""
        labels = np.atleast_2d(labels)
        pos = (labels == 1).astype(np.float64)
        return pos @ self.negatives + (1.0 - pos) @ self.positives


class StreamFactory:
    """Derives independent, reproducible generators from one 64-bit seed.

    Each (phase, group, iteration) triple maps to its own ``SeedSequence``
    spawn key, so the order in which streams are requested never changes the
    draws any of them produce.
    """

    def __init__(self, seed: int, path: Tuple[int, ...] = ()):
        self.seed = int(seed) & SEED_MASK
        self.path = tuple(path)

    @staticmethod
    def _phase_key(phase: str) -> int:
        return zlib.crc32(phase.encode("utf-8"))

    def generator(self, phase: str, group: int = 0, iteration: int = 0) -> np.random.Generator:
        key = self.path + (self._phase_key(phase), int(group), int(iteration))
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))

    def child(self, phase: str, group: int = 0) -> "StreamFactory":
        return StreamFactory(self.seed, self.path + (self._phase_key(phase), int(group)))

    def __repr__(self) -> str:
        return f"StreamFactory(seed={self.seed}, path={self.path})"


class Oracle:
    """The U_g / O_g oracle pair for every group of an instance.

    A charged oracle records every call in its ledger. The shadow oracle
    (``charged=False``) answers the same way and records nothing; it exists
    to materialize counterfactual labels for checks.
    """

    def __init__(self, instance: Instance, ledger: Optional[QueryLedger] = None, charged: bool = True):
        self.instance = instance
        self.charged = charged
        self.ledger = ledger if ledger is not None else QueryLedger(instance.num_groups)
        if self.ledger.num_groups != instance.num_groups:
            raise ContractViolation("ledger and instance disagree on the number of groups")

    def shadow(self) -> "Oracle":
        return Oracle(self.instance, QueryLedger(self.instance.num_groups), charged=False)

    def _charge_labels(self, g: int, n: int) -> None:
        if self.charged:
            self.ledger.charge_labels(g, n)

    def _charge_unlabeled(self, g: int, n: int) -> None:
        if self.charged:
            self.ledger.charge_unlabeled(g, n)

    def _conditional_pmf(self, g: int, region: Any) -> Optional[np.ndarray]:
        self.instance.check_group(g)
        mask = as_mask(region)
        if mask.shape != (self.instance.domain.size,):
            raise ContractViolation("region is not defined over the instance domain")
        weights = np.where(mask, self.instance.marginals[g], 0.0)
        total = weights.sum()
        # marginals are non-negative, so the sum is zero iff every entry is
        if total == 0.0:
            return None
        return weights / total

    def unlabeled_sample(self, g: int, region: Any, rng: np.random.Generator) -> Optional[int]:
        """One draw from U_g(region); ``None`` when the region has zero mass."""
        pmf = self._conditional_pmf(g, region)
        self._charge_unlabeled(g, 1)
        if pmf is None:
            return None
        return int(rng.choice(pmf.shape[0], p=pmf))

    def draw_unlabeled_points(self, g: int, region: Any, n: int, rng: np.random.Generator) -> Optional[np.ndarray]:
        """``n`` ordered draws from U_g(region), or ``None`` on zero mass."""
        if n < 0:
            raise ContractViolation(f"sample size must be non-negative, got {n}")
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        pmf = self._conditional_pmf(g, region)
        if pmf is None:
            self._charge_unlabeled(g, 1)
            return None
        self._charge_unlabeled(g, n)
        return rng.choice(pmf.shape[0], size=n, p=pmf)

    def draw_unlabeled_counts(self, g: int, region: Any, n: int, rng: np.random.Generator) -> Optional[np.ndarray]:
        """Per-point counts of ``n`` draws from U_g(region), or ``None`` on zero mass."""
        if n < 0:
            raise ContractViolation(f"sample size must be non-negative, got {n}")
        if n == 0:
            return np.zeros(self.instance.domain.size, dtype=np.int64)
        pmf = self._conditional_pmf(g, region)
        if pmf is None:
            self._charge_unlabeled(g, 1)
            return None
        self._charge_unlabeled(g, n)
        return rng.multinomial(n, pmf)

    def label_query(self, g: int, x: int, rng: np.random.Generator) -> int:
        """O_g(x): +1 with probability eta_g(x), otherwise -1."""
        self.instance.check_group(g)
        if not 0 <= x < self.instance.domain.size:
            raise ContractViolation(f"point {x} is outside the domain of {self.instance.domain.size} points")
        if not self.instance.marginals[g, x] > 0:
            raise ContractViolation(f"point {x} is outside the support of group {g}")
        self._charge_labels(g, 1)
        return 1 if rng.random() < self.instance.etas[g, x] else -1

    def label_counts(self, g: int, counts: np.ndarray, rng: np.random.Generator) -> LabeledSet:
        """Label every unlabeled draw in ``counts`` through O_g."""
        counts = np.asarray(counts, dtype=np.int64)
        if np.any(counts[self.instance.marginals[g] == 0] > 0):
            raise ContractViolation(f"counts include points outside the support of group {g}")
        positives = rng.binomial(counts, self.instance.etas[g])
        self._charge_labels(g, int(counts.sum()))
        return LabeledSet(g, positives, counts - positives)

    def draw_labeled_set(self, g: int, region: Any, n: int, rng: np.random.Generator) -> LabeledSet:
        """``n`` labeled draws from U_g(region); empty when the region has zero mass."""
        counts = self.draw_unlabeled_counts(g, region, n, rng)
        if counts is None or n == 0:
            return LabeledSet.empty(g, self.instance.domain.size)
        return self.label_counts(g, counts, rng)
