import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion in sorted({r[0] for r in results}):
        cases = [r for r in results if r[0] == criterion]
        passed = sum(r[2] for r in cases)
        status = "PASS" if passed == len(cases) else "FAIL"
        tr.write_line(f"criterion {criterion}: {status} ({passed}/{len(cases)} cases)")
        for _, case, ok, detail in cases:
            tr.write_line(f"    {'PASS' if ok else 'FAIL'} {case}: {detail}")
