"""Shared fixtures: CLI-driven config runs and the criterion summary.

The acceptance tests register one verdict per numbered criterion; a
terminal-summary hook prints them as a block so a run ends with one
pass/fail line per criterion regardless of where the details live.
"""

from __future__ import annotations

import time
from pathlib import Path

import pytest

from paoi.cli import main as cli_main

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

_verdicts: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail verdict for one acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> None:
        _verdicts[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        passed, detail = _verdicts[number]
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {word} - {detail}")


@pytest.fixture(scope="session")
def config_runs(tmp_path_factory):
    """Run every shipped experiment config through the CLI once.

    Returns {config stem: (csv path, wall seconds)}.  Shared by the
    figure-based criteria so each config is simulated a single time.
    """
    out_dir = tmp_path_factory.mktemp("config-csv")
    runs: dict[str, tuple[Path, float]] = {}
    for path in sorted(CONFIG_DIR.glob("*.json")):
        out = out_dir / (path.stem + ".csv")
        start = time.perf_counter()
        code = cli_main(["compare", "--config", str(path), "--out", str(out)])
        elapsed = time.perf_counter() - start
        if code != 0:
            raise RuntimeError(f"config {path.name} exited with code {code}")
        runs[path.stem] = (out, elapsed)
    return runs
