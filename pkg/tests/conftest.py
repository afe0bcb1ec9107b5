from __future__ import annotations

import json
from pathlib import Path

import pytest

from echoflow.ingest import parse_dataset

FIXTURE = Path(__file__).parent / "data" / "fixture"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((FIXTURE / "manifest.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def fixture_bundle():
    return parse_dataset(
        [FIXTURE / "tweets.jsonl"], [FIXTURE / "users.jsonl"],
        [FIXTURE / "edges_follow.csv"], [FIXTURE / "edges_retweet.csv"],
    )


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
