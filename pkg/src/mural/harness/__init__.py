"""Experiment configs, sweeps, report checks and summaries."""
