"""Experiment grid: tasks x policies x strategies x seeds."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from ..taskgen import BABI_SIZES, Policy, biased_policy, gen_dataset
from ..training import Hyperparams, evaluate, extract_examples, train

log = logging.getLogger(__name__)

PASS_THRESHOLD = 95.0
COLUMNS = ("task", "pi_acc", "strategy", "seed", "valid_acc", "test_acc", "wall_time", "status")


@dataclass
class ResultRecord:
    task: int
    pi_acc: float
    strategy: str
    seed: int
    valid_acc: float
    test_acc: float
    wall_time: float
    status: str = "ok"


def make_policy(pi: float, biased: bool) -> Policy:
    return biased_policy(pi) if biased else Policy(pi)


def _run_group(task, pi, seed, strategies, hyper, biased, sizes) -> list[ResultRecord]:
    train_eps, valid_eps, test_eps = gen_dataset(None, task, make_policy(pi, biased), sizes, seed)
    examples = extract_examples(train_eps, hyper.context_kinds, hyper.memory_size)
    out = []
    for strategy in strategies:
        t0 = time.perf_counter()
        try:
            result = train(strategy, examples, replace(hyper, seed=seed), valid_eps)
            test = evaluate(result.model, test_eps)
            rec = ResultRecord(task, pi, strategy, seed, result.valid_acc, test, 0.0)
        except Exception as exc:  # recorded, the grid carries on
            log.warning("task %d pi %s %s seed %d failed: %s", task, pi, strategy, seed, exc)
            rec = ResultRecord(task, pi, strategy, seed, math.nan, math.nan, 0.0, f"error: {exc}")
        rec.wall_time = time.perf_counter() - t0
        out.append(rec)
    return out


def run_grid(
    tasks: Sequence[int],
    pis: Sequence[float],
    strategies: Sequence[str],
    seeds: Sequence[int] = (0,),
    hyper: Hyperparams | None = None,
    biased: bool = False,
    sizes: tuple[int, int, int] = BABI_SIZES,
    workers: int | None = None,
) -> list[ResultRecord]:
    """Run every cell. Each (task, pi, seed) dataset is generated once and
    shared by all strategies; groups run in parallel when ``workers > 1``."""
    hyper = hyper or Hyperparams()
    if not strategies:
        return []
    groups = [(t, p, s) for t in tasks for p in pis for s in seeds]
    workers = workers or os.cpu_count() or 1
    args = [(t, p, s, tuple(strategies), hyper, biased, sizes) for t, p, s in groups]
    if workers <= 1 or len(groups) <= 1:
        chunks = [_run_group(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_group, *zip(*args)))
    return [r for chunk in chunks for r in chunk]


def completed_counts(records: Iterable[ResultRecord]) -> dict[tuple[str, float], int]:
    """Per (strategy, pi): number of tasks whose seed-mean test accuracy is >= 95%."""
    accs = defaultdict(list)
    for r in records:
        accs[r.strategy, r.pi_acc, r.task].append(r.test_acc)
    counts: dict[tuple[str, float], int] = {}
    for (strategy, pi, _), vals in accs.items():
        key = (strategy, pi)
        mean = sum(vals) / len(vals)
        counts[key] = counts.get(key, 0) + int(not math.isnan(mean) and mean >= PASS_THRESHOLD)
    return counts


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.4g}" if abs(v) < 1 else f"{v:.2f}"
    return str(v)


def write_results(path: str | Path, records: Sequence[ResultRecord]) -> None:
    """TSV with a header, result rows, then one ``completed`` row per
    (strategy, pi); plus a JSON-lines twin next to it."""
    path = Path(path)
    lines = ["\t".join(COLUMNS)]
    for r in records:
        lines.append("\t".join(_fmt(getattr(r, c)).replace("\t", " ") for c in COLUMNS))
    for (strategy, pi), n in sorted(completed_counts(records).items()):
        lines.append("\t".join(["completed", _fmt(pi), strategy, "-", "-", str(n), "-", "summary"]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with path.with_suffix(".jsonl").open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")


def read_results(path: str | Path) -> list[ResultRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != COLUMNS:
        raise ValueError(f"{path}: not a results table")
    out = []
    for line in lines[1:]:
        f = line.split("\t")
        if f[0] == "completed":
            continue
        out.append(ResultRecord(int(f[0]), float(f[1]), f[2], int(f[3]), float(f[4]), float(f[5]), float(f[6]), f[7]))
    return out
