"""Execution of experiment configs: cells, report files and the aggregate CSV."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, List, Optional, Tuple

from mural.algorithms import AgnosticConfig, run_agnostic, run_approximation, run_group_realizable
from mural.algorithms.agnostic import label_complexity_envelope
from mural.baselines import run_passive
from mural.domain import Instance
from mural.errors import MuralError
from mural.harness.config import Cell, ExperimentConfig
from mural.harness.verify import verify_report
from mural.oracles import StreamFactory
from mural.regions import disagreement_coefficients
from mural.report import EXCESS_ATOL, RunReport
from mural.scenarios import build_scenario

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "scenario", "algorithm", "eps", "seed", "excess", "total_labels",
    "per_group_labels", "theta_max", "runtime_ms", "status",
]

DIAGNOSTIC_COLUMNS = ["cell", "iteration", "group", "h_id", "estimate", "true_loss"]

EXIT_OK = 0
EXIT_MISS = 1
EXIT_INVALID = 2


@dataclass
class CellOutcome:
    """Report and status of one (algorithm, eps, seed) cell."""

    cell: Cell
    report: Optional[RunReport]
    status: str
    problems: List[str] = field(default_factory=list)


@dataclass
class ExperimentResult:
    """Every cell outcome plus the files written."""

    outcomes: List[CellOutcome]
    report_paths: List[str]
    csv_path: str
    strict: bool

    @property
    def misses(self) -> List[CellOutcome]:
        return [o for o in self.outcomes if o.status == "miss"]

    @property
    def failures(self) -> List[CellOutcome]:
        return [o for o in self.outcomes if o.status in ("invalid", "error")]

    @property
    def exit_status(self) -> int:
        if self.failures:
            return EXIT_INVALID
        if self.strict and self.misses:
            return EXIT_MISS
        return EXIT_OK


def _dispatch(inst: Instance, config: ExperimentConfig, cell: Cell, keep_estimates: bool) -> RunReport:
    streams = StreamFactory(cell.seed)
    if cell.algorithm == "agnostic":
        cfg = AgnosticConfig(cell.eps, config.delta, config.constant_scale)
        return run_agnostic(inst, cfg, streams, keep_estimates=keep_estimates)
    if cell.algorithm == "group_realizable":
        return run_group_realizable(inst, cell.eps, config.delta, streams)
    if cell.algorithm == "approximation":
        return run_approximation(inst, cell.eps, config.delta, streams, config.constant_scale)
    return run_passive(inst, cell.eps, config.delta, streams)


def _add_theta(report: RunReport, inst: Instance, eps: float, delta: float) -> None:
    thetas = disagreement_coefficients(inst, report.nu, eps)
    theta_max = max(thetas)
    envelope = label_complexity_envelope(inst.num_groups, theta_max, inst.hclass.vc_dim, eps, delta)
    report.diagnostics.update({
        "theta": thetas,
        "theta_max": theta_max,
        "envelope": envelope,
        "labels_over_envelope": report.total_labels / envelope,
    })


def _status(report: RunReport, config: ExperimentConfig, eps: float) -> str:
    # guarantees only hold at full constants for the scaled learners
    if report.algorithm in ("agnostic", "approximation") and config.constant_scale < 1:
        return "ok"
    if report.algorithm == "approximation":
        return "ok" if report.diagnostics["within_approximation_bound"] else "miss"
    return "ok" if report.excess <= eps + EXCESS_ATOL else "miss"


def run_cell(config: ExperimentConfig, cell: Cell) -> CellOutcome:
    """Run one cell and check its report; never raises for library errors."""
    try:
        inst = build_scenario(config.scenario, config.scenario_params)
        report = _dispatch(inst, config, cell, keep_estimates=config.diagnostics_csv is not None)
        report.scenario = config.scenario_echo()
        report.config["seed"] = cell.seed
        _add_theta(report, inst, cell.eps, config.delta)
    except MuralError as err:
        logger.error("%s failed: %s", cell.name, err)
        return CellOutcome(cell, None, "error", [str(err)])
    problems = verify_report(report, inst)
    if problems:
        for problem in problems:
            logger.error("%s: %s", cell.name, problem)
        return CellOutcome(cell, report, "invalid", problems)
    status = _status(report, config, cell.eps)
    if status == "miss":
        logger.warning("%s: excess %.4g misses the guarantee", cell.name, report.excess)
    return CellOutcome(cell, report, status)


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def csv_row(outcome: CellOutcome, scenario: str) -> List[Any]:
    """One results.csv row; failed cells keep their key columns and status."""
    cell, report = outcome.cell, outcome.report
    if report is None:
        return [scenario, cell.algorithm, f"{cell.eps:g}", cell.seed, "", "", "", "", "", outcome.status]
    return [
        scenario,
        cell.algorithm,
        f"{cell.eps:g}",
        cell.seed,
        repr(report.excess),
        report.total_labels,
        ";".join(str(n) for n in report.per_group_labels),
        repr(report.diagnostics.get("theta_max", "")),
        f"{report.runtime_ms:.3f}",
        outcome.status,
    ]


def render_csv(header: List[str], rows: List[List[Any]]) -> str:
    """CSV text: header row, then ``rows``, with Unix line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _diagnostic_rows(outcome: CellOutcome, inst: Instance) -> List[List[Any]]:
    rows = []
    report = outcome.report
    if report is None:
        return rows
    for trace in report.traces:
        for h_id, estimates in sorted(trace.get("estimates", {}).items(), key=lambda kv: int(kv[0])):
            for g, estimate in enumerate(estimates):
                rows.append([outcome.cell.name, trace["iteration"], g, int(h_id), repr(estimate),
                             repr(float(inst.loss_matrix[int(h_id), g]))])
    return rows


def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None, jobs: int = 1,
                   strict: bool = False, seed_offset: int = 0) -> ExperimentResult:
    """Run every cell of ``config``, writing one JSON report per cell and the
    aggregate CSV once all cells are done."""
    out_dir = out_dir or config.out_dir
    cells = config.cells(seed_offset)
    inst = build_scenario(config.scenario, config.scenario_params)
    logger.info("running %d cells of %s with %d job(s)", len(cells), config.scenario, jobs)
    os.makedirs(out_dir, exist_ok=True)

    worker = partial(run_cell, config)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(worker, cells))
    else:
        outcomes = [worker(cell) for cell in cells]

    report_paths = []
    for outcome in outcomes:
        if outcome.report is None:
            continue
        path = os.path.join(out_dir, f"{outcome.cell.name}.json")
        write_atomic(path, outcome.report.to_json() + "\n")
        report_paths.append(path)

    csv_path = os.path.join(out_dir, config.csv)
    write_atomic(csv_path, render_csv(CSV_COLUMNS, [csv_row(o, inst.name) for o in outcomes]))

    if config.diagnostics_csv is not None:
        rows = [row for o in outcomes for row in _diagnostic_rows(o, inst)]
        write_atomic(os.path.join(out_dir, config.diagnostics_csv), render_csv(DIAGNOSTIC_COLUMNS, rows))

    result = ExperimentResult(outcomes, report_paths, csv_path, strict)
    logger.info("%d cells done: %d missed, %d failed", len(outcomes), len(result.misses), len(result.failures))
    return result


def strip_runtime(csv_text: str) -> Tuple[str, ...]:
    """CSV lines without the runtime column, for determinism checks."""
    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader)
    drop = header.index("runtime_ms")
    return tuple(",".join(v for i, v in enumerate(row) if i != drop) for row in [header, *reader])
