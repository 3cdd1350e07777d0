import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs for more than a few seconds")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    # sub-parts such as 13a/13b/13c share one line
    lines = {}
    for key in sorted(mod.RESULTS, key=mod.criterion_order):
        ok, detail = mod.RESULTS[key]
        num = "".join(c for c in key if c.isdigit())
        prev_ok, parts = lines.get(num, (True, []))
        label = f"({key[len(num):]}) {'PASS' if ok else 'FAIL'} " if key != num else ""
        lines[num] = (prev_ok and ok, parts + [label + detail])
    terminalreporter.section("acceptance criteria")
    for num, (ok, parts) in lines.items():
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {' | '.join(parts)}")
