from __future__ import annotations

from datetime import datetime, timezone

import pytest

from driftwatch.ingest import CommentRecord

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        prev = _criteria.get(number)
        if prev is None or prev[0] == "PASS":
            _criteria[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title}")


def make_comment(cid: str, tokens, when: str = "2020-09-15T12:00:00", **kw) -> CommentRecord:
    ts = datetime.fromisoformat(when).replace(tzinfo=timezone.utc)
    tokens = tuple(tokens)
    return CommentRecord(cid, ts, " ".join(tokens), tokens, **kw)


def run_cli(argv, capsys):
    """Run the CLI in-process; return (exit code, run directory or None, stderr)."""
    from pathlib import Path

    from driftwatch.cli import main

    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    lines = [l for l in out.splitlines() if l.strip()]
    return code, (Path(lines[-1]) if code == 0 and lines else None), err


def write_spec(path, **spec):
    import json

    path.write_text(json.dumps(spec), encoding="utf-8")
    return path
