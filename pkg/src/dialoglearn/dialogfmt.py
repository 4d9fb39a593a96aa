"""Text serialization of dialog datasets (format ``#dialoglearn v1``).

One turn per line, tab separated::

    <turn_index>\t<speaker>\t<kind>\t<text>\t<reward>\t<gold-or-dash>

Turn indices restart at 1 in each episode and episodes are separated by a
line holding ``==``.
"""

from __future__ import annotations

from pathlib import Path

from .taskgen import KINDS, DialogEpisode, Turn, ValidationError

HEADER = "#dialoglearn v1"
SEPARATOR = "=="


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _check_field(text: str) -> str:
    if "\t" in text or "\n" in text or "\r" in text:
        raise ValueError(f"field contains a tab or newline: {text!r}")
    return text


def serialize(episodes: list[DialogEpisode]) -> str:
    lines = [HEADER]
    for n, ep in enumerate(episodes):
        if n:
            lines.append(SEPARATOR)
        for i, t in enumerate(ep.turns, 1):
            if t.gold == "-":
                raise ValueError("gold '-' collides with the no-gold marker")
            gold = "-" if t.gold is None else _check_field(t.gold)
            lines.append(f"{i}\t{t.speaker}\t{t.kind}\t{_check_field(t.text)}\t{t.reward}\t{gold}")
    return "\n".join(lines) + "\n"


def parse(text: str) -> list[DialogEpisode]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != HEADER:
        raise ParseError(1, f"expected header {HEADER!r}")
    episodes: list[DialogEpisode] = []
    current: list[Turn] | None = None
    for lineno, line in enumerate(lines[1:], 2):
        if line == SEPARATOR:
            if not current:
                raise ParseError(lineno, "empty episode")
            episodes.append(DialogEpisode(current))
            current = None
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise ParseError(lineno, f"expected 6 tab-separated fields, got {len(fields)}")
        idx, speaker, kind, utterance, reward, gold = fields
        current = current or []
        if idx != str(len(current) + 1):
            raise ParseError(lineno, f"turn index {idx!r}, expected {len(current) + 1}")
        if reward not in ("0", "1"):
            raise ParseError(lineno, f"bad reward {reward!r}")
        if speaker not in ("T", "L"):
            raise ParseError(lineno, f"unknown speaker {speaker!r}")
        if kind not in KINDS:
            raise ParseError(lineno, f"unknown kind {kind!r}")
        turn = Turn(speaker, kind, utterance, int(reward), None if gold == "-" else gold)
        try:
            turn.validate()
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        current.append(turn)
    if current is not None:
        episodes.append(DialogEpisode(current))
    elif episodes:
        raise ParseError(len(lines), "trailing episode separator")
    return episodes


def write(path: str | Path, episodes: list[DialogEpisode]) -> None:
    Path(path).write_bytes(serialize(episodes).encode("utf-8"))


def read(path: str | Path) -> list[DialogEpisode]:
    return parse(Path(path).read_bytes().decode("utf-8"))
