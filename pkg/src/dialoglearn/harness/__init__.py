"""Orchestration: dataset generation, training runs, the experiment grid,
gradient checks and reports."""
