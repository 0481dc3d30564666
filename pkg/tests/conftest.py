import pytest

from cargo_recovery.scenarios import worked_example

_acceptance = pytest.StashKey[list]()


@pytest.fixture
def worked():
    return worked_example()


@pytest.fixture
def verdict(request):
    """Record one acceptance line: verdict(number, title, passed, detail)."""
    lines = request.config.stash.setdefault(_acceptance, [])

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        lines.append((number, title, passed, detail))
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_acceptance, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(lines, key=lambda item: item[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
