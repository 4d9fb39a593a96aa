"""Markdown rendering of a results table next to the reference accuracies."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Sequence

from .experiment import PASS_THRESHOLD, ResultRecord, completed_counts

TASK_NAMES = {
    1: "Imitating an Expert Student",
    2: "Positive and Negative Feedback",
    3: "Answers Supplied by Teacher",
    4: "Hints Supplied by Teacher",
    5: "Supporting Facts Supplied by Teacher",
    6: "Partial Feedback",
    7: "No Feedback",
    8: "Imitation + Feedback Mixture",
    9: "Asking For Corrections",
    10: "Asking For Supporting Facts",
}

# Reference test accuracies (%), keyed by strategy, per task, columns pi = 0.5, 0.1, 0.01.
REFERENCE = {
    "imitation": [(100, 100, 100), (79, 28, 21), (83, 37, 25), (85, 23, 22), (84, 24, 27),
                  (90, 22, 22), (90, 34, 19), (90, 89, 82), (85, 30, 22), (86, 25, 26)],
    "rbi": [(100, 100, 100), (99, 92, 91), (99, 96, 92), (99, 91, 90), (100, 96, 83),
            (98, 81, 59), (20, 22, 29), (99, 98, 98), (99, 89, 83), (99, 96, 84)],
    "fp": [(23, 30, 29), (93, 54, 30), (99, 96, 99), (97, 99, 66), (98, 99, 100),
           (100, 100, 99), (100, 98, 99), (28, 64, 67), (23, 15, 21), (23, 30, 48)],
    "rbi_fp": [(99, 99, 100), (99, 92, 96), (99, 100, 98), (99, 100, 100), (100, 99, 100),
               (99, 100, 99), (98, 99, 99), (99, 98, 97), (95, 90, 84), (97, 95, 91)],
}
REFERENCE_PIS = (0.5, 0.1, 0.01)


def reference(strategy: str, task: int, pi: float) -> int | None:
    if strategy not in REFERENCE or pi not in REFERENCE_PIS:
        return None
    return REFERENCE[strategy][task - 1][REFERENCE_PIS.index(pi)]


def _cell(acc: float, ref: int | None) -> str:
    s = "err" if math.isnan(acc) else f"{acc:.1f}"
    if not math.isnan(acc) and acc >= PASS_THRESHOLD:
        s = f"**{s}**"
    return s if ref is None else f"{s} ({ref})"


def render_markdown(records: Sequence[ResultRecord]) -> str:
    """One row per task, one column per (strategy, pi); reference values in parentheses."""
    if not records:
        return "| Task |\n|---|\n"
    accs = defaultdict(list)
    for r in records:
        accs[r.strategy, r.pi_acc, r.task].append(r.test_acc)
    strategies = list(dict.fromkeys(r.strategy for r in records))
    pis = sorted({r.pi_acc for r in records}, reverse=True)
    tasks = sorted({r.task for r in records})
    cols = [(s, p) for s in strategies for p in pis]
    out = ["| Task | " + " | ".join(f"{s} pi={p:g}" for s, p in cols) + " |"]
    out.append("|---" * (len(cols) + 1) + "|")
    for t in tasks:
        cells = []
        for s, p in cols:
            vals = accs.get((s, p, t))
            cells.append("" if not vals else _cell(sum(vals) / len(vals), reference(s, t, p)))
        out.append(f"| {t} - {TASK_NAMES.get(t, '')} | " + " | ".join(cells) + " |")
    counts = completed_counts(records)
    cells = []
    for s, p in cols:
        ref = None
        if len(tasks) == 10 and s in REFERENCE and p in REFERENCE_PIS:
            ref = sum(reference(s, t, p) >= PASS_THRESHOLD for t in tasks)
        n = counts.get((s, p), 0)
        cells.append(f"{n}" + ("" if ref is None else f" ({ref})"))
    out.append("| Completed tasks (>=95%) | " + " | ".join(cells) + " |")
    return "\n".join(out) + "\n"
