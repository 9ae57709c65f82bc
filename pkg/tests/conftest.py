import numpy as np
import pytest
from hypothesis import settings

from susyrabi import constants as C

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

TWO_PI = C.TWO_PI


@pytest.fixture(scope="session")
def broken_point():
    """omega = 2pi 10 kHz with the coupling used for tomography."""
    return 0.543 * C.OMEGA_BROKEN, C.OMEGA_BROKEN


def assert_close(a, b, atol, msg=""):
    err = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
    assert err <= atol, f"{msg} max deviation {err:.3e} > {atol:.1e}"


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion.

    Usage: ``with criterion(3, "witten indices") as c: c.check(ok, detail)``.
    Any exception inside the block marks the criterion FAIL and propagates.
    """

    class _Criterion:
        def __init__(self, number, title):
            self.number, self.title = number, title
            self.checks = []

        def check(self, ok, detail):
            self.checks.append((bool(ok), detail))

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc_type is not None:
                self.checks.append((False, f"{exc_type.__name__}: {exc}"))
            ok = bool(self.checks) and all(c[0] for c in self.checks)
            parts = "; ".join(("" if c[0] else "[x] ") + c[1] for c in self.checks)
            line = f"criterion {self.number} {'PASS' if ok else 'FAIL'}: {self.title} | {parts}"
            _CRITERIA[self.number] = line
            print(line)
            if exc_type is None:
                assert ok, line
            return False

    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
