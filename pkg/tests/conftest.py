from collections import defaultdict

import pytest

from biclab.model import ModelParams

# criterion -> list of (part, passed, detail); filled by the acceptance tests
ACCEPTANCE = defaultdict(list)


def record(criterion: int, part: str, passed: bool | None, detail: str) -> None:
    """``passed=None`` marks an informational line that does not enter the verdict."""
    ACCEPTANCE[criterion].append((part, passed, detail))
    tag = "info" if passed is None else ("pass" if passed else "FAIL")
    print(f"criterion {criterion} [{part}]: {tag} - {detail}")


@pytest.fixture(scope="session")
def bic4():
    """Couplings of the four-particle BIC, (t, U, V) = (1, -20, -10)."""
    return ModelParams(1.0, -20.0, -10.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p for _, p, _ in parts if p is not None)
        tr.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'}")
        for part, passed, detail in parts:
            tag = "info" if passed is None else ("pass" if passed else "FAIL")
            tr.write_line(f"    [{tag}] {part}: {detail}")
