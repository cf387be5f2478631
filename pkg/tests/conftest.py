import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ragmt.corpus import BilingualPair, Domain, LanguagePair  # noqa: E402

EN_DE = LanguagePair("en", "de")


def make_pair(i, src, tgt=None, domain=Domain.TTL, lang=EN_DE):
    return BilingualPair(i, src, tgt or f"T:{src}", domain, lang)


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(name, records, raw_lines=()):
        path = tmp_path / name
        lines = [json.dumps(r, ensure_ascii=False) for r in records] + list(raw_lines)
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path
    return _write


# verdict lines recorded by test_acceptance.py, echoed once at the end of the run
ACCEPTANCE = {"collected": False, "lines": {}}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE["collected"]:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        terminalreporter.write_line(ACCEPTANCE["lines"].get(n, f"criterion {n:2d} FAIL: no verdict (test errored or was skipped)"))
