import pytest

from dialoglearn.world_sim import EpisodeSkeleton, QuestionPoint, Statement

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def sample_story():
    """Mary -> hallway, John -> bathroom, Mary -> kitchen; ask Mary, then John."""
    return EpisodeSkeleton(
        [
            Statement("Mary", "went to", "hallway"),
            Statement("John", "moved to", "bathroom"),
            Statement("Mary", "travelled to", "kitchen"),
            QuestionPoint("Mary", "kitchen", 2),
            QuestionPoint("John", "bathroom", 1),
        ]
    )


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
