import json

import pytest

from etpower import cli, report

DESK_SEED = 42
DESK_ITERATIONS = 2000


class DeskRun:
    """One desk-scale simulate run through the command-line entry point."""

    def __init__(self, out_dir, workers):
        code = cli.main(["simulate", "--iterations", str(DESK_ITERATIONS), "--seed",
                         str(DESK_SEED), "--workers", str(workers), "--out", str(out_dir)])
        assert code == 0
        self.dir = out_dir
        self.summary_text = (out_dir / "summary.json").read_text()
        self.summary = json.loads(self.summary_text)
        self.agg = report.read_aggregate(out_dir)


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    return DeskRun(tmp_path_factory.mktemp("desk_w1"), workers=1)


@pytest.fixture(scope="session")
def desk_parallel(tmp_path_factory):
    return DeskRun(tmp_path_factory.mktemp("desk_w8"), workers=8)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number:>2}. {name}: {detail}")
