"""Command-line entry point: ``dialoglearn <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .. import dialogfmt
from ..taskgen import BABI_SIZES, ValidationError, gen_dataset, summarize
from ..tensorcore import TrainingError
from ..training import STRATEGIES, Hyperparams, Model, evaluate, extract_examples, format_log, train
from .experiment import make_policy, read_results, run_grid, write_results
from .gradcheck import check_gradients
from .report import render_markdown

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3
SPLITS = ("train", "valid", "test")

# CLI flag -> Hyperparams field
HYPER_FLAGS = {"dim": "dim", "hops": "hops", "lr": "lr", "epochs": "epochs", "batch": "batch", "k": "k", "patience": "patience", "clip": "clip"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p]


def _str_list(text: str) -> list[str]:
    return [p for p in text.split(",") if p]


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_hyper(args) -> Hyperparams:
    """Defaults < config file < command-line flags."""
    types = {f.name: f.type for f in fields(Hyperparams)}
    values: dict = {}
    if getattr(args, "config", None):
        for key, raw in read_config(args.config).items():
            if key not in types:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw)
    for flag, name in HYPER_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if getattr(args, "seed", None) is not None and isinstance(args.seed, int):
        values["seed"] = args.seed
    try:
        return Hyperparams(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _coerce(key: str, raw: str):
    default = getattr(Hyperparams(), key)
    if key == "context_kinds":
        return tuple(_str_list(raw))
    if key == "clip":
        return None if raw.lower() in ("none", "") else float(raw)
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file of hyperparameters")
    p.add_argument("--dim", type=int)
    p.add_argument("--hops", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--k", type=int, help="negative responses sampled per example")
    p.add_argument("--patience", type=int)
    p.add_argument("--clip", type=float, help="gradient norm clip")


def _split_path(data: str, split: str) -> Path:
    p = Path(data)
    return p / f"{split}.txt" if p.is_dir() else p


def cmd_generate(args) -> int:
    sizes = tuple(_int_list(args.sizes)) if args.sizes else BABI_SIZES
    if len(sizes) != 3:
        raise UsageError("--sizes needs three numbers: train,valid,test")
    if not 1 <= args.task <= 10:
        raise UsageError("--task must be 1..10")
    policy = make_policy(args.pi, args.biased)
    splits = gen_dataset(None, args.task, policy, sizes, args.seed, share_stories=args.share_stories)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, episodes in zip(SPLITS, splits):
        dialogfmt.write(out / f"{name}.txt", episodes)
        s = summarize(episodes)
        print(
            f"{name}\tquestions={s['questions']}\tpolicy_accuracy={s['policy_accuracy']:.4f}"
            f"\treward_rate={s['reward_rate']:.4f}\treward_rate_correct={s['reward_rate_correct']:.4f}"
        )
    return 0


def cmd_train(args) -> int:
    if args.strategy not in STRATEGIES:
        raise UsageError(f"--strategy must be one of {', '.join(STRATEGIES)}")
    hyper = build_hyper(args)
    train_eps = dialogfmt.read(_split_path(args.data, "train"))
    valid_path = Path(args.valid) if args.valid else (Path(args.data) / "valid.txt" if Path(args.data).is_dir() else None)
    valid_eps = dialogfmt.read(valid_path) if valid_path and valid_path.exists() else None
    examples = extract_examples(train_eps, hyper.context_kinds, hyper.memory_size)
    result = train(args.strategy, examples, hyper, valid_eps)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.model.save(out)
    out.with_suffix(out.suffix + ".log").write_text(format_log(result.log), encoding="utf-8")
    print(f"best_epoch={result.best_epoch}\tvalid_acc={result.valid_acc:.1f}%\tcheckpoint={out}")
    return 0


def cmd_eval(args) -> int:
    try:
        model = Model.load(args.checkpoint)
    except (ValueError, KeyError) as exc:
        raise ValidationError(f"{args.checkpoint}: unreadable checkpoint ({exc})") from None
    episodes = dialogfmt.read(_split_path(args.data, "test"))
    print(f"test_acc={evaluate(model, episodes):.1f}%")
    return 0


def cmd_experiment(args) -> int:
    hyper = build_hyper(args)
    strategies = _str_list(args.strategies)
    bad = [s for s in strategies if s not in STRATEGIES]
    if bad:
        raise UsageError(f"unknown strategies: {', '.join(bad)}")
    sizes = tuple(_int_list(args.sizes)) if args.sizes else BABI_SIZES
    records = run_grid(
        _int_list(args.tasks), _float_list(args.pis), strategies, _int_list(args.seeds),
        hyper, args.biased, sizes, args.workers,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(out, records)
    sys.stdout.write(out.read_text(encoding="utf-8"))
    return 0


def cmd_gradcheck(args) -> int:
    reports = check_gradients(args.seed, args.dim)
    ok = True
    for name, rep in reports.items():
        status = "PASS" if rep.passed else "FAIL"
        ok &= rep.passed
        print(f"{name}\tmax_rel_error={rep.max_rel_error:.3e}\tcoords={rep.coordinates}\t{status}")
    return 0 if ok else EXIT_NUMERIC


def cmd_report(args) -> int:
    text = render_markdown(read_results(args.results))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dialoglearn", description="Dialog-based language learning with memory networks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write train/valid/test dialog files")
    p.add_argument("--task", type=int, required=True)
    p.add_argument("--pi", type=float, default=0.5)
    p.add_argument("--biased", action="store_true", help="wrong answers favour 'bathroom'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", help="train,valid,test question counts (default 1000,100,1000)")
    p.add_argument("--share-stories", action="store_true", help="reuse stories across tasks")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True, help="directory with train.txt/valid.txt, or a train file")
    p.add_argument("--valid", help="validation file (default: <data>/valid.txt)")
    p.add_argument("--strategy", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="checkpoint path")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a test file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="test file, or directory with test.txt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run the accuracy grid")
    p.add_argument("--tasks", default="1-10")
    p.add_argument("--pis", default="0.5,0.1,0.01")
    p.add_argument("--strategies", default=",".join(STRATEGIES))
    p.add_argument("--seeds", default="0")
    p.add_argument("--biased", action="store_true")
    p.add_argument("--sizes")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True, help="results TSV path")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gradcheck", help="finite-difference check of both loss paths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=8)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="markdown table from a results TSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dialoglearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dialogfmt.ParseError, ValidationError, FileNotFoundError, OSError) as exc:
        print(f"dialoglearn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"dialoglearn: training failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"dialoglearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
