"""Mural

Multi-group active learning laboratory: learners, finite instances and an
experiment harness that measures label complexity against ground truth."""

__version__ = "0.1.0"
