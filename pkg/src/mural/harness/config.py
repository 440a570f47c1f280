"""Experiment configuration files.

A config is a JSON object::

    {
      "scenario": {"name": "threshold", "params": {"n_points": 64, "groups": 2}},
      "algorithms": ["group_realizable", "passive"],
      "eps": [0.1, 0.05],
      "delta": 0.1,
      "seeds": [0, 1, 2],
      "out_dir": "runs/threshold"
    }

Errors point at the offending line of the file.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from mural.domain import is_group_realizable
from mural.errors import ConfigError, ScenarioError
from mural.scenarios import build_scenario

logger = logging.getLogger(__name__)

ALGORITHMS = ("agnostic", "group_realizable", "approximation", "passive")

KNOWN_KEYS = {
    "scenario", "algorithm", "algorithms", "eps", "delta", "constant_scale",
    "seeds", "out_dir", "csv", "diagnostics_csv",
}

JOBS_ENV = "MURAL_JOBS"


@dataclass(frozen=True)
class Cell:
    """One (algorithm, eps, seed) run of an experiment."""

    algorithm: str
    eps: float
    seed: int

    @property
    def name(self) -> str:
        return f"{self.algorithm}-eps{self.eps:g}-seed{self.seed}"


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment: scenario, algorithms, eps grid, seeds and outputs."""

    scenario: str
    algorithms: Tuple[str, ...]
    eps: Tuple[float, ...]
    delta: float
    seeds: Tuple[int, ...]
    scenario_params: Dict[str, Any] = field(default_factory=dict)
    constant_scale: float = 1.0
    out_dir: str = "runs"
    csv: str = "results.csv"
    diagnostics_csv: Optional[str] = None
    source: Optional[str] = field(default=None, compare=False)

    def cells(self, seed_offset: int = 0) -> List[Cell]:
        return [Cell(algorithm, eps, seed + seed_offset)
                for algorithm in self.algorithms for eps in self.eps for seed in self.seeds]

    def scenario_echo(self) -> Dict[str, Any]:
        return {"name": self.scenario, "params": dict(self.scenario_params)}

    @classmethod
    def from_dict(cls, data: Any, source: Optional[str] = None, text: str = "") -> "ExperimentConfig":
        """Validate a parsed config; ``text`` is only used to anchor errors."""

        def fail(message: str, key: Optional[str] = None):
            raise ConfigError(message, source, _key_line(text, key))

        if not isinstance(data, dict):
            fail("config must be a JSON object")
        unknown = sorted(set(data) - KNOWN_KEYS)
        if unknown:
            fail(f"unknown key {unknown[0]!r}", unknown[0])

        scenario = data.get("scenario")
        if isinstance(scenario, str):
            name, params = scenario, {}
        elif isinstance(scenario, dict) and isinstance(scenario.get("name"), str):
            name, params = scenario["name"], scenario.get("params", {})
            if not isinstance(params, dict):
                fail("scenario params must be an object", "params")
        else:
            fail("scenario must be a name or an object with a name", "scenario" if "scenario" in data else None)

        if "algorithm" in data and "algorithms" in data:
            fail("give either algorithm or algorithms, not both", "algorithms")
        algo_key = "algorithms" if "algorithms" in data else "algorithm"
        algorithms = data.get(algo_key)
        if isinstance(algorithms, str):
            algorithms = [algorithms]
        if not isinstance(algorithms, list) or not algorithms:
            fail("at least one algorithm is required", algo_key if algo_key in data else None)
        for algorithm in algorithms:
            if algorithm not in ALGORITHMS:
                fail(f"unknown algorithm {algorithm!r}, expected one of {', '.join(ALGORITHMS)}", algo_key)

        eps = data.get("eps")
        eps = [eps] if isinstance(eps, (int, float)) and not isinstance(eps, bool) else eps
        if not isinstance(eps, list) or not eps or not all(_is_number(e) and e > 0 for e in eps):
            fail("eps must be a positive number or a non-empty list of them", "eps" if "eps" in data else None)

        delta = data.get("delta")
        if not _is_number(delta) or not 0 < delta < 1:
            fail("delta must be a number in (0, 1)", "delta" if "delta" in data else None)

        constant_scale = data.get("constant_scale", 1.0)
        if not _is_number(constant_scale) or not 0 < constant_scale <= 1:
            fail("constant_scale must be a number in (0, 1]", "constant_scale")

        seeds = data.get("seeds")
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool)
                                                              for s in seeds):
            fail("seeds must be a non-empty list of integers", "seeds" if "seeds" in data else None)

        for key in ("out_dir", "csv", "diagnostics_csv"):
            if key in data and data[key] is not None and not isinstance(data[key], str):
                fail(f"{key} must be a string", key)

        try:
            inst = build_scenario(name, params)
        except ScenarioError as err:
            fail(str(err), "scenario")
        if "group_realizable" in algorithms and not is_group_realizable(inst):
            fail(f"group_realizable needs a scenario where every group is realizable; {name!r} is not", algo_key)

        return cls(
            scenario=name,
            scenario_params=dict(params),
            algorithms=tuple(algorithms),
            eps=tuple(float(e) for e in eps),
            delta=float(delta),
            constant_scale=float(constant_scale),
            seeds=tuple(seeds),
            out_dir=data.get("out_dir") or "runs",
            csv=data.get("csv") or "results.csv",
            diagnostics_csv=data.get("diagnostics_csv"),
            source=source,
        )


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _key_line(text: str, key: Optional[str]) -> Optional[int]:
    if not text:
        return None
    if key is None:
        return 1
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    if match is None:
        return 1
    return text.count("\n", 0, match.start()) + 1


def parse_config(text: str, source: Optional[str] = None) -> ExperimentConfig:
    """Parse and validate config JSON; errors name ``source`` and the offending line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err.msg}", source, err.lineno) from err
    return ExperimentConfig.from_dict(data, source, text)


def load_config(path: str) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err.strerror}", path) from err
    config = parse_config(text, path)
    logger.debug("loaded %s: %d cells", path, len(config.cells()))
    return config


def default_jobs(environ: Optional[Mapping[str, str]] = None) -> int:
    """Worker count from MURAL_JOBS, 1 when unset."""
    environ = os.environ if environ is None else environ
    value = environ.get(JOBS_ENV)
    if value is None or value == "":
        return 1
    try:
        jobs = int(value)
    except ValueError:
        jobs = 0
    if jobs < 1:
        raise ConfigError(f"{JOBS_ENV} must be a positive integer, got {value!r}")
    return jobs
