from pathlib import Path

import pytest

from triepack.trajectory import Trajectory
from triepack.trie import build_trie

FIXTURES = Path(__file__).parent / "fixtures"

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def trie3_trajs() -> list[Trajectory]:
    return [
        Trajectory("T1", [5, 7, 9], [1, 1, 1]),
        Trajectory("T2", [5, 7, 8], [1, 1, 1]),
        Trajectory("T3", [5, 2], [1, 1]),
    ]


@pytest.fixture
def trie3(trie3_trajs):
    return build_trie(trie3_trajs)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
