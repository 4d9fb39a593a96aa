"""Single-supporting-fact story generator.

A tiny world of people walking between rooms. Stories interleave movement
statements with "where is X?" question points; each question records the
gold location and the index of the statement that justifies it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

PERSONS = ("Mary", "John", "Daniel", "Sandra")
LOCATIONS = ("kitchen", "hallway", "bathroom", "bedroom", "garden", "office")
VERBS = ("went to", "moved to", "travelled to", "journeyed to")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    persons: tuple[str, ...] = PERSONS
    locations: tuple[str, ...] = LOCATIONS
    verbs: tuple[str, ...] = VERBS
    statements_per_question: tuple[int, int] = (2, 4)
    questions_per_episode: int = 2

    def validate(self) -> None:
        for name in ("persons", "locations", "verbs"):
            items = getattr(self, name)
            if not items:
                raise ConfigError(f"{name} must be non-empty")
            if len(set(items)) != len(items):
                raise ConfigError(f"{name} must be duplicate-free")
        lo, hi = self.statements_per_question
        if lo < 1:
            raise ConfigError("statements_per_question: lo must be >= 1")
        if hi < lo:
            raise ConfigError("statements_per_question: hi must be >= lo")
        if self.questions_per_episode < 1:
            raise ConfigError("questions_per_episode must be >= 1")
        if len(self.locations) < 2:
            # every move must change location
            raise ConfigError("locations: need at least 2")


@dataclass(frozen=True)
class Statement:
    person: str
    verb: str
    location: str

    def text(self) -> str:
        return f"{self.person} {self.verb} the {self.location}."


@dataclass(frozen=True)
class QuestionPoint:
    person: str
    answer: str
    support: int

    def text(self) -> str:
        return f"Where is {self.person}?"


Event = Union[Statement, QuestionPoint]


@dataclass
class EpisodeSkeleton:
    events: list[Event] = field(default_factory=list)

    def question_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.events) if isinstance(e, QuestionPoint)]


def _last_move(events, person: str, before: int) -> int | None:
    for i in range(before - 1, -1, -1):
        e = events[i]
        if isinstance(e, Statement) and e.person == person:
            return i
    return None


def gen_skeleton(config: WorldConfig, rng: np.random.Generator) -> EpisodeSkeleton:
    """Sample one story: blocks of fresh movements, each closed by a question."""
    config.validate()
    lo, hi = config.statements_per_question
    where: dict[str, str] = {}
    events: list[Event] = []
    for _ in range(config.questions_per_episode):
        n = int(rng.integers(lo, hi + 1))
        for _ in range(n):
            person = config.persons[int(rng.integers(len(config.persons)))]
            options = [loc for loc in config.locations if loc != where.get(person)]
            location = options[int(rng.integers(len(options)))]
            verb = config.verbs[int(rng.integers(len(config.verbs)))]
            where[person] = location
            events.append(Statement(person, verb, location))
        moved = [p for p in config.persons if p in where]
        person = moved[int(rng.integers(len(moved)))]
        support = _last_move(events, person, len(events))
        events.append(QuestionPoint(person, where[person], support))
    return EpisodeSkeleton(events)


def _question(skeleton: EpisodeSkeleton, question_index: int) -> QuestionPoint:
    event = skeleton.events[question_index]
    if not isinstance(event, QuestionPoint):
        raise ValueError(f"event {question_index} is a statement, not a question")
    return event


def supporting_fact(skeleton: EpisodeSkeleton, question_index: int) -> int:
    """Index of the asked person's most recent movement before the question."""
    q = _question(skeleton, question_index)
    idx = _last_move(skeleton.events, q.person, question_index)
    assert idx is not None, f"{q.person} never moved before question {question_index}"
    return idx


def gold_answer(skeleton: EpisodeSkeleton, question_index: int) -> str:
    return skeleton.events[supporting_fact(skeleton, question_index)].location
