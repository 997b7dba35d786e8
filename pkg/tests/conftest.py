import json
import os
from pathlib import Path
from typing import Dict, Tuple

import hypothesis
import pytest

from circpack.io import parse_instance
from circpack.model import Instance

FIXTURES = Path(__file__).parent / "fixtures"

# Filled by the acceptance tests, echoed after the run so the one-line
# verdicts survive pytest's output capture.
ACCEPTANCE: Dict[int, Tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        word = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {num}: {word} - {detail}")


@pytest.fixture(scope="session")
def acceptance_log() -> Dict[int, Tuple[bool, str]]:
    return ACCEPTANCE

hypothesis.settings.register_profile(
    "ci", max_examples=60, derandomize=True, deadline=None
)
hypothesis.settings.register_profile(
    "thorough", max_examples=500, deadline=None
)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def benchmark_text() -> str:
    return (FIXTURES / "benchmark10.txt").read_text()


@pytest.fixture
def make_benchmark(benchmark_text):
    """Factory for the 10-rectangle benchmark instance (R = 4.18)."""

    def build(objective="count", rotate=False) -> Instance:
        return parse_instance(benchmark_text, objective, rotate, False)

    return build


@pytest.fixture(scope="session")
def reference_packings():
    """The four frozen reference packings, keyed by short name."""
    out = {}
    for name in ("ref_count", "ref_area", "ref_count_rot", "ref_area_rot"):
        out[name] = json.loads((FIXTURES / f"{name}.json").read_text())
    return out
