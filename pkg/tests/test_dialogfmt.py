import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialoglearn import dialogfmt
from dialoglearn.dialogfmt import HEADER, ParseError, parse, serialize
from dialoglearn.taskgen import (
    FeedbackTemplates,
    Policy,
    SupervisionMode,
    DialogEpisode,
    Turn,
    ValidationError,
    apply_mode,
    gen_dataset,
)


def test_sample_task3_lines(sample_story):
    # a policy that is always wrong, with the wrong answer fixed at bedroom
    policy = Policy(0.0, (1.0, "bedroom"))
    ep = apply_mode(sample_story, SupervisionMode.of(3), policy, FeedbackTemplates(), np.random.default_rng(0))
    lines = serialize([ep]).split("\n")
    assert lines[0] == HEADER
    assert lines[1] == "1\tT\tstmt\tMary went to the hallway.\t0\t-"
    assert lines[4] == "4\tT\tq\tWhere is Mary?\t0\t-"
    assert lines[5] == "5\tL\tans\tbedroom\t0\tkitchen"
    assert lines[6] == "6\tT\tanswer-fb\tNo, the answer is kitchen.\t0\t-"


def test_empty_dataset_is_header_only():
    assert serialize([]) == HEADER + "\n"
    assert parse(HEADER + "\n") == []


def test_generated_round_trip_all_tasks():
    for task in range(1, 11):
        d = gen_dataset(None, task, Policy(0.3), (40, 5, 5), seed=task)[0]
        assert parse(serialize(d)) == d


@st.composite
def turns(draw):
    kind = draw(st.sampled_from(["stmt", "q", "ans", "fb", "help", "hint-fb", "answer-fb", "fact-fb"]))
    speaker = "L" if kind in ("ans", "help") else "T"
    text = draw(st.text(st.characters(blacklist_characters="\t\n\r", blacklist_categories=("Cs",)), max_size=20))
    reward = draw(st.integers(0, 1)) if kind == "fb" else 0
    gold = draw(st.text(st.characters(blacklist_characters="\t\n\r", blacklist_categories=("Cs",)), min_size=1, max_size=8)) if kind == "ans" else None
    if gold == "-":  # reserved marker for "no gold"
        gold = "--"
    return Turn(speaker, kind, text, reward, gold)


datasets = st.lists(st.builds(DialogEpisode, st.lists(turns(), min_size=1, max_size=6)), max_size=5)


@settings(max_examples=100, deadline=None)
@given(datasets)
def test_round_trip_random(d):
    assert parse(serialize(d)) == d


@settings(max_examples=100, deadline=None)
@given(datasets, datasets)
def test_serialize_injective(a, b):
    if a != b:
        assert serialize(a) != serialize(b)


def test_five_fields_names_line():
    text = HEADER + "\n1\tT\tstmt\thello\t0\t-\n2\tT\tstmt\thello\t0\n"
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert exc.value.lineno == 3
    assert "line 3" in str(exc.value)


def test_reward_on_answer_is_invalid():
    with pytest.raises(ValidationError, match="line 2"):
        parse(HEADER + "\n1\tL\tans\tkitchen\t1\tkitchen\n")


@pytest.mark.parametrize(
    "body",
    [
        "2\tT\tstmt\tx\t0\t-",       # index out of order
        "1\tT\tstmt\tx\t5\t-",       # reward not 0/1
        "1\tQ\tstmt\tx\t0\t-",       # speaker
        "1\tT\twho\tx\t0\t-",        # kind
        "==",                        # empty episode
        "1\tT\tstmt\tx\t0\t-\n==",   # trailing separator
    ],
)
def test_malformed(body):
    with pytest.raises(ParseError):
        parse(HEADER + "\n" + body + "\n")


def test_missing_header():
    with pytest.raises(ParseError):
        parse("1\tT\tstmt\tx\t0\t-\n")


def test_file_round_trip_is_byte_stable(tmp_path):
    d = gen_dataset(None, 9, Policy(0.5), (30, 3, 3))[0]
    dialogfmt.write(tmp_path / "a.txt", d)
    dialogfmt.write(tmp_path / "b.txt", dialogfmt.read(tmp_path / "a.txt"))
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert b"\r" not in (tmp_path / "a.txt").read_bytes()
