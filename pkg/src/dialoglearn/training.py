"""Learning strategies: imitation, reward-based imitation (RBI), forward
prediction (FP) and RBI+FP, with validation-based model selection."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import memn2n as mn
from .taskgen import DialogEpisode, ValidationError
from .tensorcore import ParamStore, TrainingError, load_checkpoint, save_checkpoint, sgd_step

log = logging.getLogger(__name__)

STRATEGIES = ("imitation", "rbi", "fp", "rbi_fp")
STORY_KINDS = ("stmt",)


@dataclass
class Hyperparams:
    dim: int = 32
    hops: int = 2
    lr: float = 0.05
    epochs: int = 200
    batch: int = 32
    k: int = 16
    seed: int = 0
    patience: int = 30
    clip: float | None = 10.0
    memory_size: int = mn.MEMORY_SIZE
    expert_counts_as_reward: bool = True
    identity_maps: str = "all"
    context_kinds: tuple[str, ...] = STORY_KINDS

    def __post_init__(self):
        self.context_kinds = tuple(self.context_kinds)
        for name in ("dim", "lr", "batch", "k", "patience", "memory_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 1 <= self.hops <= 3:
            raise ValueError("hops must be 1..3")


@dataclass
class TrainingExample:
    x: str
    c: list[str]
    a: str
    reward: int
    response: str
    gold: str | None
    expert: bool = False


def _context(turns, end: int, kinds, memory_size: int) -> list[str]:
    c = [t.text for t in turns[:end] if t.kind in kinds]
    return c[-memory_size:]


def extract_examples(
    episodes: Sequence[DialogEpisode],
    context_kinds: Sequence[str] = STORY_KINDS,
    memory_size: int = mn.MEMORY_SIZE,
) -> list[TrainingExample]:
    """One example per learner answer.

    ``x`` is the question, ``c`` the episode turns of ``context_kinds`` before
    it (most recent ``memory_size``), ``response`` the teacher turns after the
    answer up to the next story turn, joined with spaces. A learner help
    request inside that window is skipped.
    """
    out = []
    for ep in episodes:
        turns = ep.turns
        q_at = None
        for i, t in enumerate(turns):
            if t.kind == "q":
                q_at = i
            if t.kind != "ans":
                continue
            if q_at is None:
                raise ValidationError("answer turn before any question")
            j = i + 1
            while j < len(turns) and turns[j].kind not in ("stmt", "q"):
                j += 1
            after = turns[i + 1 : j]
            teacher = [u.text for u in after if u.speaker == "T"]
            out.append(
                TrainingExample(
                    x=turns[q_at].text,
                    c=_context(turns, q_at, context_kinds, memory_size),
                    a=t.text,
                    reward=int(any(u.reward for u in after)),
                    response=" ".join(teacher),
                    gold=t.gold,
                    expert=not after,
                )
            )
    return out


def questions(episodes: Sequence[DialogEpisode], context_kinds=STORY_KINDS, memory_size=mn.MEMORY_SIZE):
    """``(x, c, gold)`` for every answered question; never looks at answers or feedback."""
    out = []
    for ep in episodes:
        q_at = None
        for i, t in enumerate(ep.turns):
            if t.kind == "q":
                q_at = i
            elif t.kind == "ans":
                if t.gold is None:
                    raise ValidationError("answer turn without gold annotation")
                if q_at is None:
                    raise ValidationError("answer turn before any question")
                out.append((ep.turns[q_at].text, _context(ep.turns, q_at, context_kinds, memory_size), t.gold))
    return out


@dataclass
class Model:
    store: ParamStore
    vocab: mn.Vocabulary
    candidates: mn.TextSet
    responses: mn.TextSet | None
    hyper: Hyperparams
    meta: dict = field(default_factory=dict)

    @classmethod
    def for_examples(cls, examples: Sequence[TrainingExample], hyper: Hyperparams, rng=None) -> "Model":
        texts = []
        for e in examples:
            texts.append(e.x)
            texts.extend(e.c)
            texts.append(e.a)
            texts.append(e.response)
        vocab = mn.Vocabulary.from_texts(texts)
        candidates = mn.TextSet(sorted({e.a for e in examples}), vocab)
        resp = sorted({e.response for e in examples if e.response})
        responses = mn.TextSet(resp, vocab) if resp else None
        rng = rng if rng is not None else np.random.default_rng(hyper.seed)
        store = mn.init_params(len(vocab), hyper.dim, hyper.hops, hyper.memory_size, rng, identity_maps=hyper.identity_maps)
        return cls(store, vocab, candidates, responses, hyper)

    def encode(self, text: str) -> np.ndarray:
        return mn.encode_bow(text, self.vocab)

    def batch(self, xs: Sequence[str], cs: Sequence[Sequence[str]]) -> mn.Batch:
        V = len(self.vocab)
        mems = [np.array([self.encode(t) for t in c]).reshape(len(c), V) for c in cs]
        return mn.Batch.build([self.encode(x) for x in xs], mems, self.hyper.memory_size)

    def predict_many(self, xs, cs, chunk: int = 256) -> list[str]:
        out = []
        for s in range(0, len(xs), chunk):
            scores, _ = mn.answer_scores(self.store, self.batch(xs[s : s + chunk], cs[s : s + chunk]), self.candidates.bow)
            out.extend(self.candidates.texts[i] for i in np.argmax(scores, axis=1))
        return out

    def predict(self, x: str, c: Sequence[str]) -> str:
        return self.predict_many([x], [c])[0]

    def save(self, path: str | Path) -> None:
        meta = dict(self.meta)
        hyper = asdict(self.hyper)
        hyper["context_kinds"] = list(hyper["context_kinds"])
        meta.update(
            vocab=self.vocab.words[1:],
            candidates=self.candidates.texts,
            responses=self.responses.texts if self.responses else [],
            hyper=hyper,
        )
        save_checkpoint(path, self.store, meta)

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        store, meta = load_checkpoint(path)
        vocab = mn.Vocabulary(meta["vocab"])
        hyper = Hyperparams(**meta["hyper"])
        candidates = mn.TextSet(meta["candidates"], vocab)
        responses = mn.TextSet(meta["responses"], vocab) if meta["responses"] else None
        extra = {k: v for k, v in meta.items() if k not in ("vocab", "candidates", "responses", "hyper")}
        return cls(store, vocab, candidates, responses, hyper, extra)


def evaluate(model: Model, episodes: Sequence[DialogEpisode]) -> float:
    """Percentage of questions answered with the gold answer."""
    qs = questions(episodes, model.hyper.context_kinds, model.hyper.memory_size)
    if not qs:
        return 0.0
    xs, cs, golds = zip(*qs)
    preds = model.predict_many(list(xs), list(cs))
    return 100.0 * sum(p == g for p, g in zip(preds, golds)) / len(golds)


@dataclass
class _Encoded:
    x: np.ndarray
    mem: np.ndarray
    a: int
    response: int  # -1 when there is none
    rewarded: bool


def _encode_examples(model: Model, examples: Sequence[TrainingExample]) -> list[_Encoded]:
    V = len(model.vocab)
    out = []
    for e in examples:
        resp = model.responses.index.get(e.response, -1) if (model.responses and e.response) else -1
        if e.a not in model.candidates.index:
            raise ValidationError(f"answer {e.a!r} is not a known candidate")
        rewarded = bool(e.reward) or (e.expert and model.hyper.expert_counts_as_reward)
        mem = np.array([model.encode(t) for t in e.c]).reshape(len(e.c), V)
        out.append(_Encoded(model.encode(e.x), mem, model.candidates.index[e.a], resp, rewarded))
    return out


def _answer_step(model: Model, items: Sequence[_Encoded]) -> float:
    batch = mn.Batch.build([it.x for it in items], [it.mem for it in items], model.hyper.memory_size)
    scores, cache = mn.answer_scores(model.store, batch, model.candidates.bow)
    loss, g = mn.batch_cross_entropy(scores, np.array([it.a for it in items]))
    mn.answer_backward(model.store, cache, g)
    sgd_step(model.store, model.hyper.lr, model.hyper.clip)
    return loss


def _fp_step(model: Model, items: Sequence[_Encoded], rng: np.random.Generator) -> float:
    batch = mn.Batch.build([it.x for it in items], [it.mem for it in items], model.hyper.memory_size)
    n = len(model.responses)
    ids, targets = [], []
    for it in items:
        s = mn.sample_response_ids(n, it.response, model.hyper.k, rng)
        ids.append(s)
        targets.append(int(np.flatnonzero(s == it.response)[0]))
    resp_bow = model.responses.bow[np.array(ids)]
    actions = np.array([it.a for it in items])
    scores, cache = mn.fp_scores(model.store, batch, model.candidates.bow, actions, resp_bow)
    loss, g = mn.batch_cross_entropy(scores, np.array(targets))
    mn.fp_backward(model.store, cache, g)
    sgd_step(model.store, model.hyper.lr, model.hyper.clip)
    return loss


@dataclass
class TrainResult:
    model: Model
    log: list[dict]
    best_epoch: int
    valid_acc: float


def train(
    strategy: str,
    examples: Sequence[TrainingExample],
    hyper: Hyperparams,
    valid: Sequence[DialogEpisode] | None = None,
) -> TrainResult:
    """Train with one of ``STRATEGIES`` and keep the best validation epoch.

    Without ``valid`` the last epoch is kept.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if not examples:
        raise TrainingError("no training examples")
    rng = np.random.default_rng(hyper.seed)
    model = Model.for_examples(examples, hyper, rng)
    model.meta["strategy"] = strategy
    items = _encode_examples(model, examples)
    use_answer = strategy in ("imitation", "rbi", "rbi_fp")
    use_fp = strategy in ("fp", "rbi_fp")

    if strategy == "rbi":
        items = [it for it in items if it.rewarded]
    elif strategy == "fp":
        items = [it for it in items if it.response >= 0]
        if not items:
            raise TrainingError("forward prediction needs teacher responses; this data has none (try imitation or rbi)")
    elif strategy == "rbi_fp":
        items = [it for it in items if it.rewarded or it.response >= 0]

    def score() -> float:
        return evaluate(model, valid) if valid is not None else float("nan")

    history: list[dict] = []
    best = model.store.copy()
    best_acc, best_epoch = score(), 0
    if not items:
        log.warning("%s: no usable training examples; returning initial parameters", strategy)
        return TrainResult(model, history, 0, best_acc)

    stale = 0
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(len(items))
        losses = []
        for s in range(0, len(order), hyper.batch):
            chunk = [items[i] for i in order[s : s + hyper.batch]]
            if use_fp:
                fp_items = [it for it in chunk if it.response >= 0]
                if fp_items:
                    losses.append(_fp_step(model, fp_items, rng))
            if use_answer:
                ans_items = chunk if strategy == "imitation" else [it for it in chunk if it.rewarded]
                if ans_items:
                    losses.append(_answer_step(model, ans_items))
        acc = score()
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "valid_acc": acc})
        log.debug("epoch %d loss %.4f valid %.1f", epoch, history[-1]["train_loss"], acc)
        if valid is None or acc > best_acc:
            best_acc, best_epoch, stale = acc, epoch, 0
            best = model.store.copy()
        else:
            stale += 1
            if stale >= hyper.patience:
                break
    model.store.load(best)
    return TrainResult(model, history, best_epoch, best_acc)


def train_imitation(examples, hyper, valid=None) -> TrainResult:
    return train("imitation", examples, hyper, valid)


def train_rbi(examples, hyper, valid=None) -> TrainResult:
    return train("rbi", examples, hyper, valid)


def train_fp(examples, hyper, valid=None) -> TrainResult:
    return train("fp", examples, hyper, valid)


def train_rbi_fp(examples, hyper, valid=None) -> TrainResult:
    return train("rbi_fp", examples, hyper, valid)


def format_log(history: Sequence[dict]) -> str:
    return "".join(
        f"epoch={h['epoch']}\ttrain_loss={h['train_loss']:.6f}\tvalid_acc={h['valid_acc']:.1f}\n" for h in history
    )
