"""Run reports shared by every learner and the harness."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from mural.errors import ContractViolation
from mural.oracles import QueryLedger

logger = logging.getLogger(__name__)

EXCESS_ATOL = 1e-12

# JSON key of the ``excess`` field
EXCESS_KEY = "excess_true_loss"


@dataclass
class RunReport:
    """Outcome of one learner run on one instance.

    ``excess`` is the exact true worst-group loss of the output minus the
    minimax value nu of the class.
    """

    algorithm: str
    instance: str
    config: Dict[str, Any]
    output_h: int
    true_max_loss: float
    nu: float
    excess: float
    optimal_ids: List[int]
    ledger: Dict[str, List[int]]
    traces: List[Dict[str, Any]] = field(default_factory=list)
    subreports: List[Dict[str, Any]] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    scenario: Optional[Dict[str, Any]] = None
    runtime_ms: float = 0.0

    @classmethod
    def build(cls, algorithm: str, inst, output_h: int, ledger: QueryLedger, optimum,
              config: Dict[str, Any], **extra) -> "RunReport":
        loss = float(inst.max_loss_vector[output_h])
        nu = float(optimum.nu)
        return cls(
            algorithm=algorithm,
            instance=inst.name,
            config=dict(config),
            output_h=int(output_h),
            true_max_loss=loss,
            nu=nu,
            excess=loss - nu,
            optimal_ids=[int(i) for i in optimum.tied_ids],
            ledger=ledger.snapshot(),
            **extra,
        )

    @property
    def total_labels(self) -> int:
        return sum(self.ledger["label_queries"])

    @property
    def per_group_labels(self) -> List[int]:
        return list(self.ledger["label_queries"])

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready fields; ``excess`` is stored as ``excess_true_loss``."""
        data = asdict(self)
        data[EXCESS_KEY] = data.pop("excess")
        return data

    def to_json(self, include_runtime: bool = True) -> str:
        data = self.to_dict()
        if not include_runtime:
            data.pop("runtime_ms")
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunReport":
        if not isinstance(data, dict):
            raise ContractViolation("a run report must be a JSON object")
        data = dict(data)
        if EXCESS_KEY in data:
            data["excess"] = data.pop(EXCESS_KEY)
        try:
            return cls(**data)
        except TypeError as err:
            raise ContractViolation(f"not a run report: {err}") from err

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))
