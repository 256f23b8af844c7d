import pytest

_ACCEPTANCE = []


class _Recorder:
    def __call__(self, number, title, passed, detail=""):
        _ACCEPTANCE.append((number, title, bool(passed), detail))
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  {detail}"
        print(line)
        return passed


@pytest.fixture
def acceptance():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  {detail}")
