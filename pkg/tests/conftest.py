"""Collects acceptance results and prints one line per criterion."""
import pytest

CRITERIA = ("1", "2", "3", "4", "5", "6", "7", "8a", "8b", "8c", "8d", "8e", "8 time", "9")

_results: dict[str, list[tuple[bool, str]]] = {}


class Recorder:
    def __init__(self, criterion: str):
        self.criterion = criterion

    def check(self, ok: bool, detail: str) -> None:
        """Record one sub-check of the criterion, then assert it."""
        _results.setdefault(self.criterion, []).append((bool(ok), detail))
        assert ok, f"criterion {self.criterion}: {detail}"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    return Recorder(marker.args[0])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion covered by the test")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in CRITERIA:
        checks = _results.get(cid)
        if checks is None:
            terminalreporter.write_line(f"criterion {cid}: FAIL (not run to completion)")
            continue
        failed = [d for ok, d in checks if not ok]
        if failed:
            passed = [d for ok, d in checks if ok]
            also = f"; passed: {'; '.join(passed)}" if passed else ""
            terminalreporter.write_line(f"criterion {cid}: FAIL ({'; '.join(failed)}{also})")
        else:
            terminalreporter.write_line(f"criterion {cid}: PASS ({'; '.join(d for _, d in checks)})")
