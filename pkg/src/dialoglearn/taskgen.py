"""Turn story skeletons into the ten dialog-supervision datasets.

A fixed answering policy plays the learner; the teacher reacts according to
the supervision mode (plain yes/no, corrections, hints, supporting facts,
partial or absent rewards, expert mixture, help requests).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .world_sim import EpisodeSkeleton, QuestionPoint, Statement, WorldConfig, gen_skeleton

TEACHER, LEARNER = "T", "L"
KINDS = ("stmt", "q", "ans", "fb", "help", "hint-fb", "answer-fb", "fact-fb")
FEEDBACK_KINDS = ("fb", "hint-fb", "answer-fb", "fact-fb")
LEARNER_KINDS = ("ans", "help")

POSITIVE = (
    "Yes, that's right!",
    "Yes, that's correct!",
    "Correct!",
    "That's right!",
    "Yes!",
    "Right.",
)
NEGATIVE = (
    "No, that's incorrect.",
    "Sorry, that's not it.",
    "Wrong.",
    "No, that is incorrect.",
    "No, that's not right.",
    "That's wrong.",
)
HELP_REQUEST = "Can you help me?"

DOWNSTAIRS = frozenset({"kitchen", "hallway", "garden"})
UPSTAIRS = frozenset({"bathroom", "bedroom", "office"})

BABI_SIZES = (1000, 100, 1000)


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Turn:
    speaker: str
    kind: str
    text: str
    reward: int = 0
    gold: str | None = None

    def validate(self) -> None:
        if self.speaker not in (TEACHER, LEARNER):
            raise ValidationError(f"unknown speaker {self.speaker!r}")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown kind {self.kind!r}")
        if (self.speaker == LEARNER) != (self.kind in LEARNER_KINDS):
            raise ValidationError(f"kind {self.kind!r} cannot be spoken by {self.speaker}")
        if self.reward not in (0, 1):
            raise ValidationError(f"reward must be 0 or 1, got {self.reward!r}")
        if self.reward and self.kind != "fb":
            raise ValidationError(f"reward on a {self.kind!r} turn")
        if (self.gold is not None) != (self.kind == "ans"):
            raise ValidationError("gold annotation belongs on ans turns only")


@dataclass
class DialogEpisode:
    turns: list[Turn] = field(default_factory=list)


@dataclass(frozen=True)
class FeedbackTemplates:
    positive: tuple[str, ...] = POSITIVE
    negative: tuple[str, ...] = NEGATIVE

    def __post_init__(self):
        if len(self.positive) != 6 or len(self.negative) != 6:
            raise ValueError("need exactly 6 positive and 6 negative templates")
        if set(self.positive) & set(self.negative):
            raise ValueError("positive and negative templates overlap")


@dataclass(frozen=True)
class Policy:
    """Fixed answerer: right with probability ``pi_acc``.

    ``bias`` is ``(p_fixed, answer)``: when wrong, say ``answer`` with
    probability ``p_fixed`` instead of a uniform wrong guess.
    """

    pi_acc: float
    bias: tuple[float, str] | None = None

    def __post_init__(self):
        if not 0.0 <= self.pi_acc <= 1.0:
            raise ValueError(f"pi_acc out of [0, 1]: {self.pi_acc}")
        if self.bias is not None and not 0.0 <= self.bias[0] <= 1.0:
            raise ValueError(f"bias probability out of [0, 1]: {self.bias[0]}")


def biased_policy(pi_acc: float = 0.5) -> Policy:
    return Policy(pi_acc, (0.5, "bathroom"))


@dataclass(frozen=True)
class SupervisionMode:
    mode: int
    reward_rate: float = 1.0

    @classmethod
    def of(cls, mode: int) -> "SupervisionMode":
        if not 1 <= mode <= 10:
            raise ValueError(f"task must be in 1..10, got {mode}")
        if mode == 6:
            return cls(6, 0.5)
        if mode == 7:
            return cls(7, 0.0)
        return cls(mode, 1.0)


class QASource(Protocol):
    """Anything that can produce stories with gold answers.

    The simulated world is the only bundled source; a knowledge-base backed
    source would implement the same three members.
    """

    candidates: Sequence[str]

    def skeleton(self, rng: np.random.Generator) -> EpisodeSkeleton: ...

    def answer_class(self, answer: str) -> str: ...


def location_class(location: str) -> str:
    if location in DOWNSTAIRS:
        return "downstairs"
    if location in UPSTAIRS:
        return "upstairs"
    raise ValueError(f"unknown location {location!r}")


@dataclass(frozen=True)
class WorldSource:
    config: WorldConfig = WorldConfig()

    @property
    def candidates(self) -> tuple[str, ...]:
        return self.config.locations

    def skeleton(self, rng: np.random.Generator) -> EpisodeSkeleton:
        return gen_skeleton(self.config, rng)

    def answer_class(self, answer: str) -> str:
        return location_class(answer)


def sample_answer(policy: Policy, gold: str, candidates: Sequence[str], rng: np.random.Generator) -> str:
    if gold not in candidates:
        raise ValueError(f"gold answer {gold!r} is not a candidate")
    if len(candidates) < 2:
        raise ValueError("need at least two candidates")
    if rng.random() < policy.pi_acc:
        return gold
    if policy.bias is not None:
        p_fixed, fixed = policy.bias
        if fixed not in candidates:
            raise ValueError(f"biased answer {fixed!r} is not a candidate")
        if rng.random() < p_fixed and fixed != gold:
            return fixed
    wrong = [c for c in candidates if c != gold]
    return wrong[int(rng.integers(len(wrong)))]


def _pick(options: Sequence[str], rng: np.random.Generator) -> str:
    return options[int(rng.integers(len(options)))]


def render_feedback(
    mode: SupervisionMode,
    correct: bool,
    gold: str,
    supporting_stmt: Statement,
    templates: FeedbackTemplates,
    rng: np.random.Generator,
    answer_class=location_class,
) -> list[Turn]:
    m = mode.mode
    if m == 1:
        raise ValueError("task 1 has no teacher feedback")
    if correct:
        if m == 7:
            reward = 0
        elif m == 6:
            reward = int(rng.random() < mode.reward_rate)
        else:
            reward = 1
        return [Turn(TEACHER, "fb", _pick(templates.positive, rng), reward)]
    fact = supporting_stmt.text()
    if m in (2, 8):
        return [Turn(TEACHER, "fb", _pick(templates.negative, rng))]
    if m in (3, 6, 7):
        return [Turn(TEACHER, "answer-fb", f"No, the answer is {gold}.")]
    if m == 4:
        return [Turn(TEACHER, "hint-fb", f"No, they are {answer_class(gold)}.")]
    if m == 5:
        return [Turn(TEACHER, "fact-fb", f"No, because {fact}")]
    turns = [Turn(TEACHER, "fb", _pick(templates.negative, rng)), Turn(LEARNER, "help", HELP_REQUEST)]
    if m == 9:
        turns.append(Turn(TEACHER, "answer-fb", f"{gold[:1].upper()}{gold[1:]}."))
    else:
        turns.append(Turn(TEACHER, "fact-fb", f"A relevant fact is {fact}"))
    return turns


def apply_mode(
    skeleton: EpisodeSkeleton,
    mode: SupervisionMode,
    policy: Policy,
    templates: FeedbackTemplates,
    rng: np.random.Generator,
    candidates: Sequence[str] | None = None,
    answer_class=location_class,
) -> DialogEpisode:
    if candidates is None:
        candidates = WorldConfig().locations
    turns: list[Turn] = []
    for event in skeleton.events:
        if isinstance(event, Statement):
            turns.append(Turn(TEACHER, "stmt", event.text()))
            continue
        assert isinstance(event, QuestionPoint)
        gold = event.answer
        turns.append(Turn(TEACHER, "q", event.text()))
        expert = mode.mode == 1 or (mode.mode == 8 and rng.random() < 0.5)
        if expert:
            turns.append(Turn(LEARNER, "ans", gold, gold=gold))
            continue
        answer = sample_answer(policy, gold, candidates, rng)
        turns.append(Turn(LEARNER, "ans", answer, gold=gold))
        support = skeleton.events[event.support]
        turns.extend(render_feedback(mode, answer == gold, gold, support, templates, rng, answer_class))
    return DialogEpisode(turns)


def _truncate(episode: DialogEpisode, n_questions: int) -> DialogEpisode:
    """Keep the first ``n_questions`` exchanges, dropping everything after."""
    seen = 0
    for i, turn in enumerate(episode.turns):
        if turn.kind == "q":
            seen += 1
        elif seen == n_questions and turn.kind == "stmt":
            return DialogEpisode(episode.turns[:i])
        if seen > n_questions:
            return DialogEpisode(episode.turns[:i])
    return episode


def _gen_split(source, mode, policy, templates, n_questions, story_rng, dialog_rng):
    episodes: list[DialogEpisode] = []
    remaining = n_questions
    while remaining > 0:
        skeleton = source.skeleton(story_rng)
        ep = apply_mode(skeleton, mode, policy, templates, dialog_rng, source.candidates, source.answer_class)
        n = sum(t.kind == "q" for t in ep.turns)
        if n > remaining:
            ep = _truncate(ep, remaining)
            n = remaining
        episodes.append(ep)
        remaining -= n
    return episodes


def gen_dataset(
    config: WorldConfig | None,
    mode: int | SupervisionMode,
    policy: Policy,
    sizes: tuple[int, int, int] = BABI_SIZES,
    seed: int = 0,
    share_stories: bool = False,
    templates: FeedbackTemplates | None = None,
    source: QASource | None = None,
) -> tuple[list[DialogEpisode], list[DialogEpisode], list[DialogEpisode]]:
    """Generate (train, valid, test) with exactly ``sizes`` questions each.

    Every split gets its own seed stream. With ``share_stories`` the story
    stream ignores the task number, so all ten tasks are built on the same
    underlying stories.
    """
    if isinstance(mode, int):
        mode = SupervisionMode.of(mode)
    if any(n < 1 for n in sizes):
        raise ValueError(f"split sizes must be >= 1, got {sizes}")
    if source is None:
        source = WorldSource(config or WorldConfig())
    templates = templates or FeedbackTemplates()
    splits = []
    for split, n in enumerate(sizes):
        story_key = [seed, split] if share_stories else [seed, split, mode.mode]
        story_rng = np.random.default_rng(np.random.SeedSequence(story_key + [0]))
        dialog_rng = np.random.default_rng(np.random.SeedSequence([seed, split, mode.mode, 1]))
        splits.append(_gen_split(source, mode, policy, templates, n, story_rng, dialog_rng))
    return tuple(splits)


def exchanges(episode: DialogEpisode):
    """Yield ``(ans_index, feedback_turns)`` for every answer in the episode."""
    turns = episode.turns
    for i, t in enumerate(turns):
        if t.kind != "ans":
            continue
        j = i + 1
        while j < len(turns) and turns[j].kind not in ("stmt", "q"):
            j += 1
        yield i, turns[i + 1 : j]


def summarize(episodes: list[DialogEpisode]) -> dict:
    """Policy accuracy and reward statistics over policy-answered questions."""
    n_q = n_policy = n_correct = n_reward = n_correct_rewarded = 0
    for ep in episodes:
        for i, after in exchanges(ep):
            ans = ep.turns[i]
            n_q += 1
            if not after:
                continue  # expert answer, no feedback
            n_policy += 1
            right = ans.text == ans.gold
            rewarded = any(t.reward for t in after)
            n_correct += right
            n_reward += rewarded
            n_correct_rewarded += right and rewarded
    return {
        "questions": n_q,
        "policy_answers": n_policy,
        "policy_accuracy": n_correct / n_policy if n_policy else float("nan"),
        "reward_rate": n_reward / n_policy if n_policy else 0.0,
        "reward_rate_correct": n_correct_rewarded / n_correct if n_correct else 0.0,
    }
