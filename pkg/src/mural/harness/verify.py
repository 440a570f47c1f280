"""Independent re-checks of run reports against their instance."""

from __future__ import annotations

import logging
from typing import List

from mural.domain import Instance, true_max_loss
from mural.errors import InvariantViolation
from mural.report import EXCESS_ATOL, RunReport

logger = logging.getLogger(__name__)

RECOMPUTE_ATOL = 1e-9


def _ledger_problems(report: RunReport, inst: Instance) -> List[str]:
    labels = report.ledger.get("label_queries", [])
    unlabeled = report.ledger.get("unlabeled_queries", [])
    if len(labels) != inst.num_groups or len(unlabeled) != inst.num_groups:
        return [f"ledger covers {len(labels)} groups, instance has {inst.num_groups}"]
    if any(n < 0 for n in labels + unlabeled):
        return ["ledger holds negative counts"]

    problems = []
    if report.algorithm == "agnostic":
        charged = [0] * inst.num_groups
        for trace in report.traces:
            for g in range(inst.num_groups):
                charged[g] += trace["labeled_in"][g] + trace["labeled_out"][g]
        if charged != labels:
            problems.append(f"traces charge {charged} labels, ledger holds {labels}")
    elif report.algorithm in ("group_realizable", "approximation"):
        per_group = [0] * inst.num_groups
        for sub in report.subreports:
            per_group[sub["group"]] += sub["label_queries"]
        if per_group != labels:
            problems.append(f"per-group learners charge {per_group} labels, ledger holds {labels}")
        after = report.diagnostics.get("labels_after_learning")
        if after is not None and after != labels:
            problems.append("labels were charged after the per-group learning phase")
    elif report.algorithm == "passive":
        expected = report.config.get("samples_per_group")
        if expected is not None and any(n != expected for n in labels):
            problems.append(f"passive run drew {labels} labels, expected {expected} per group")
    return problems


def verify_report(report: RunReport, inst: Instance) -> List[str]:
    """Problems found in ``report``; an empty list means it checks out."""
    if not 0 <= report.output_h < inst.hclass.size:
        return [f"output hypothesis {report.output_h} is not in the class"]
    worst = [float(true_max_loss(inst, h)) for h in inst.hclass]
    nu = min(worst)
    excess = worst[report.output_h] - nu

    problems = []
    if abs(nu - report.nu) > RECOMPUTE_ATOL:
        problems.append(f"report nu {report.nu!r} differs from recomputed {nu!r}")
    if abs(excess - report.excess) > RECOMPUTE_ATOL:
        problems.append(f"report excess {report.excess!r} differs from recomputed {excess!r}")
    if report.excess < -EXCESS_ATOL:
        problems.append(f"negative excess {report.excess!r}")
    problems.extend(_ledger_problems(report, inst))
    return problems


def check_report(report: RunReport, inst: Instance) -> None:
    """Raise InvariantViolation naming every problem ``verify_report`` finds."""
    problems = verify_report(report, inst)
    if problems:
        logger.debug("%s report on %s failed %d checks", report.algorithm, report.instance, len(problems))
        raise InvariantViolation("; ".join(problems))
