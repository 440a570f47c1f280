"""Active learners: the agnostic learner, CAL and the per-group reductions."""

from mural.algorithms.agnostic import AgnosticConfig, run_agnostic
from mural.algorithms.cal import run_cal
from mural.algorithms.reduction import run_approximation, run_group_realizable

__all__ = ["AgnosticConfig", "run_agnostic", "run_cal", "run_approximation", "run_group_realizable"]
