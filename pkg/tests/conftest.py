"""Session-wide fixtures: the calibrated reference design and its expensive results."""

from __future__ import annotations

import pytest

from hts_wec.circuit import run_machine
from hts_wec.config import build_reference_design, single_width_variant
from hts_wec.superconductor import magnet_critical_current, unit_turn_field


@pytest.fixture(scope="session")
def reference():
    return build_reference_design()


@pytest.fixture(scope="session")
def single_width(reference):
    return single_width_variant(reference)


@pytest.fixture(scope="session")
def reference_unit_field(reference):
    return unit_turn_field(reference.assembly, reference.iron_boost_factor)


@pytest.fixture(scope="session")
def reference_loadline(reference, reference_unit_field):
    return magnet_critical_current(
        reference.assembly, reference.lift, 20.0, reference.iron_boost_factor, 179.0, unit_field=reference_unit_field
    )


@pytest.fixture(scope="session")
def single_width_loadline(single_width):
    return magnet_critical_current(single_width.assembly, single_width.lift, 20.0, single_width.iron_boost_factor, 179.0)


@pytest.fixture(scope="session")
def reference_run(reference):
    """(TransientResult, Metrics) of the reference machine over three wave cycles."""
    return run_machine(reference)


# ------------------------------------------------------- acceptance verdicts

_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """record(n, ok, detail): store the outcome of acceptance criterion n."""

    def record(n: int, ok: bool, detail: str) -> None:
        _VERDICTS[n] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        ok, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
