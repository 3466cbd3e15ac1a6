import contextlib

import pytest

from lossywalk.model import LatticeParams

# (criterion number, title, passed, detail) collected by test_acceptance
ACCEPTANCE = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record the outcome of one acceptance criterion; failures still propagate."""
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE.append((number, title, False, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"))
        raise
    ACCEPTANCE.append((number, title, True, ", ".join(f"{k}={v}" for k, v in detail.items())))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}" + (f" ({detail})" if detail else ""))


@pytest.fixture
def default_params():
    return LatticeParams()


@pytest.fixture(scope="session")
def figures_dir(tmp_path_factory):
    """One run of the ``figures`` command, shared by the tests that inspect it."""
    from lossywalk.cli import main

    out = tmp_path_factory.mktemp("figures") / "run1"
    assert main(["figures", "--output", str(out)]) == 0
    return out
