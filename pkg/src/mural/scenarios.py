"""Deterministic instance generators.

Every generator is a pure function of its arguments and seed. Scenarios are
also reachable by name through :func:`build_scenario`, which is what
experiment configs use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from mural.domain import FiniteDomain, GroupDistribution, HypothesisClass, Instance
from mural.errors import ScenarioError

logger = logging.getLogger(__name__)

MAX_RANDOM_SIZES = (256, 512, 8)

HALF = Fraction(1, 2)


def example1_gadget(extended: bool = False) -> Instance:
    """Two hypotheses whose worst-group ranking flips once the
    shared-agreement region is ignored.

    Points are a (disagreement, group 1), b (disagreement, group 2),
    c (agreement, group 1) and d (agreement, group 2). h predicts +1
    everywhere; h' predicts -1 on a and b. With ``extended`` a third
    hypothesis, dominated on group 1, is appended.
    """
    eta = [Fraction(3, 4), Fraction(1, 3), Fraction(1), HALF]
    zero = Fraction(0)
    groups = (
        GroupDistribution([HALF, zero, HALF, zero], eta),
        GroupDistribution([zero, HALF, zero, HALF], eta),
    )
    labels = [[1, 1, 1, 1], [-1, -1, 1, 1]]
    if extended:
        labels.append([-1, 1, -1, 1])
    name = "example1-extended" if extended else "example1"
    return Instance(FiniteDomain(4), groups, HypothesisClass(labels, vc_dim=1), name=name)


@dataclass(frozen=True)
class Example1Table:
    """Conditional-loss table of the two-classifier comparison.

    ``cells[(hyp, g)]`` maps to (loss on the disagreement cell, loss on the
    agreement cell) of group ``g``; every cell has mass 1/2.
    """

    cells: Dict[Tuple[str, int], Tuple[Fraction, Fraction]] = field(default_factory=lambda: {
        ("h", 1): (Fraction(1, 4), Fraction(0)),
        ("h", 2): (Fraction(1, 3), HALF),
        ("h'", 1): (Fraction(34, 100), Fraction(0)),
        ("h'", 2): (Fraction(0), HALF),
    })

    def group_loss(self, hyp: str, g: int) -> Fraction:
        inside, outside = self.cells[(hyp, g)]
        return HALF * inside + HALF * outside

    def max_loss(self, hyp: str) -> Fraction:
        return max(self.group_loss(hyp, g) for g in (1, 2))

    def surrogate(self, hyp: str) -> Fraction:
        """Worst group loss restricted to the disagreement cells."""
        return max(self.cells[(hyp, g)][0] for g in (1, 2))

    @property
    def margin(self) -> Fraction:
        return self.max_loss("h") - self.max_loss("h'")


def example1_table() -> Example1Table:
    """The two-classifier loss table as stated, in exact arithmetic."""
    return Example1Table()


@dataclass(frozen=True)
class NoiseSpec:
    """Label model of a threshold instance.

    ``realizable``: one threshold labels every group perfectly.
    ``group_realizable``: group g is labeled by threshold t* + offsets[g].
    ``agnostic``: group g flips labels w.p. nu[g] around t* + offsets[g].
    """

    kind: str = "realizable"
    offsets: Tuple[int, ...] = ()
    nu: Tuple[float, ...] = ()

    KINDS = ("realizable", "group_realizable", "agnostic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ScenarioError(f"unknown noise kind {self.kind!r}, expected one of {', '.join(self.KINDS)}")
        object.__setattr__(self, "offsets", tuple(int(o) for o in self.offsets))
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        if self.kind == "group_realizable" and not self.offsets:
            raise ScenarioError("group_realizable noise needs per-group offsets")
        if self.kind == "agnostic" and not self.nu:
            raise ScenarioError("agnostic noise needs per-group nu targets")
        for v in self.nu:
            if not 0 <= v < 0.5:
                raise ScenarioError(f"nu target {v} is unachievable; targets must lie in [0, 0.5)")

    @classmethod
    def realizable(cls) -> "NoiseSpec":
        return cls("realizable")

    @classmethod
    def group_realizable(cls, offsets: Sequence[int]) -> "NoiseSpec":
        return cls("group_realizable", offsets=tuple(offsets))

    @classmethod
    def agnostic(cls, nu: Sequence[float], offsets: Sequence[int] = ()) -> "NoiseSpec":
        return cls("agnostic", offsets=tuple(offsets), nu=tuple(nu))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NoiseSpec":
        unknown = set(data) - {"kind", "offsets", "nu"}
        if unknown:
            raise ScenarioError(f"unknown noise parameters: {', '.join(sorted(unknown))}")
        return cls(data.get("kind", "realizable"), tuple(data.get("offsets", ())), tuple(data.get("nu", ())))

    def per_group(self, values: Tuple, num_groups: int, default) -> Tuple:
        if not values:
            return (default,) * num_groups
        if len(values) == 1:
            return values * num_groups
        if len(values) != num_groups:
            raise ScenarioError(f"{self.kind} noise gives {len(values)} values for {num_groups} groups")
        return values


def threshold_class(n_points: int) -> HypothesisClass:
    """Thresholds t = 0..n_points: h_t(x) = +1 iff x >= t, ids ordered by t."""
    t = np.arange(n_points + 1)[:, None]
    x = np.arange(n_points)[None, :]
    return HypothesisClass(np.where(x >= t, 1, -1), vc_dim=1)


def threshold_instance(n_points: int, G: int, noise_spec: Optional[NoiseSpec] = None, seed: int = 0) -> Instance:
    """One-dimensional thresholds over a uniform grid of ``n_points`` points."""
    if n_points < 2:
        raise ScenarioError(f"threshold instances need at least 2 points, got {n_points}")
    if G < 1:
        raise ScenarioError(f"need at least one group, got {G}")
    spec = noise_spec if noise_spec is not None else NoiseSpec.realizable()
    rng = np.random.default_rng(seed)

    weights = rng.uniform(0.5, 1.5, size=(G, n_points))
    marginals = weights / weights.sum(axis=1, keepdims=True)
    t_star = int(rng.integers(n_points // 4, 3 * n_points // 4 + 1))
    offsets = spec.per_group(spec.offsets, G, 0)
    nus = spec.per_group(spec.nu, G, 0.0)
    x = np.arange(n_points)

    groups = []
    for g in range(G):
        t_g = int(np.clip(t_star + offsets[g], 0, n_points))
        above = x >= t_g
        if spec.kind == "agnostic":
            eta = np.where(above, 1.0 - nus[g], nus[g])
        else:
            eta = above.astype(np.float64)
        groups.append(GroupDistribution(marginals[g], eta))

    name = f"threshold-{spec.kind}-n{n_points}-g{G}-s{seed}"
    logger.debug("%s: t*=%d offsets=%s nu=%s", name, t_star, offsets, nus)
    return Instance(FiniteDomain(n_points), tuple(groups), threshold_class(n_points), name=name)


def random_instance(sizes: Sequence[int], seed: int = 0, label_noise: Optional[float] = None) -> Instance:
    """Random marginals, conditionals and label vectors of the given
    (|X|, |H|, G) sizes.

    Without ``label_noise`` every eta is uniform on [0, 1]. With it, a hidden
    target drawn from the class is flipped on group g with a probability
    drawn uniformly from [0, label_noise], so nu <= label_noise.
    """
    n_points, n_hyp, G = (int(s) for s in sizes)
    if not (1 <= n_points <= MAX_RANDOM_SIZES[0] and 1 <= n_hyp <= MAX_RANDOM_SIZES[1]
            and 1 <= G <= MAX_RANDOM_SIZES[2]):
        raise ScenarioError(f"random instance sizes {tuple(sizes)} exceed {MAX_RANDOM_SIZES}")
    if label_noise is not None and not 0 <= label_noise < 0.5:
        raise ScenarioError(f"label_noise must lie in [0, 0.5), got {label_noise}")
    rng = np.random.default_rng(seed)

    marginals = rng.dirichlet(np.ones(n_points), size=G)
    marginals /= marginals.sum(axis=1, keepdims=True)
    labels = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n_hyp, n_points))
    if label_noise is None:
        etas = rng.uniform(0.0, 1.0, size=(G, n_points))
    else:
        target = labels[int(rng.integers(n_hyp))]
        noise = rng.uniform(0.0, label_noise, size=G)
        etas = np.where(target[None, :] == 1, 1.0 - noise[:, None], noise[:, None])

    groups = tuple(GroupDistribution(marginals[g], etas[g]) for g in range(G))
    name = f"random-{n_points}x{n_hyp}x{G}-s{seed}"
    return Instance(FiniteDomain(n_points), groups, HypothesisClass(labels), name=name)


def adversarial_relabeling_instance() -> Instance:
    """Two groups where relabeling with per-group optima hides the noise.

    Each group lives on its own three points: a clean point (mass 0.35), a
    small clean point (0.25) and a noisy point (0.4, eta 0.55). The per-group
    optima label everything +1 on their group, so the relabeled samples look
    noise-free and favor the hypothesis that only flips the small points,
    although flipping the noisy points is optimal.
    """
    block = np.array([0.35, 0.25, 0.4])
    zeros = np.zeros(3)
    eta = np.array([1.0, 1.0, 0.55] * 2)
    groups = (
        GroupDistribution(np.concatenate([block, zeros]), eta),
        GroupDistribution(np.concatenate([zeros, block]), eta),
    )
    plus = [1, 1, 1]
    flip_noisy = [1, 1, -1]
    flip_small = [1, -1, 1]
    flip_clean = [-1, 1, 1]
    labels = [
        plus + flip_clean,
        flip_clean + plus,
        flip_noisy + flip_noisy,
        flip_small + flip_small,
    ]
    return Instance(FiniteDomain(6), groups, HypothesisClass(labels, vc_dim=2), name="adversarial-relabeling")


def _threshold_from_params(params: Dict[str, Any]) -> Instance:
    noise = params.pop("noise", None)
    spec = NoiseSpec.from_dict(noise) if noise is not None else None
    return threshold_instance(int(params.pop("n_points")), int(params.pop("groups", 1)),
                              spec, int(params.pop("seed", 0)))


def _random_from_params(params: Dict[str, Any]) -> Instance:
    return random_instance(params.pop("sizes"), int(params.pop("seed", 0)), params.pop("label_noise", None))


def _example1_from_params(params: Dict[str, Any]) -> Instance:
    return example1_gadget(bool(params.pop("extended", False)))


def _adversarial_from_params(params: Dict[str, Any]) -> Instance:
    return adversarial_relabeling_instance()


SCENARIOS: Dict[str, Callable[[Dict[str, Any]], Instance]] = {
    "example1": _example1_from_params,
    "threshold": _threshold_from_params,
    "random": _random_from_params,
    "adversarial_relabeling": _adversarial_from_params,
}


def build_scenario(name: str, params: Optional[Mapping[str, Any]] = None) -> Instance:
    """Build a registered scenario from its name and parameters."""
    try:
        builder = SCENARIOS[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}, expected one of {', '.join(sorted(SCENARIOS))}") from None
    remaining = dict(params or {})
    try:
        inst = builder(remaining)
    except KeyError as err:
        raise ScenarioError(f"scenario {name!r} is missing parameter {err}") from err
    except (TypeError, ValueError) as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError(f"bad parameters for scenario {name!r}: {err}") from err
    if remaining:
        raise ScenarioError(f"unknown parameters for scenario {name!r}: {', '.join(sorted(remaining))}")
    return inst
