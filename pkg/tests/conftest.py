import sys

import pytest

from gaussent import mpnum
from gaussent.lattice import RegionSpec, build_region_cm
from gaussent.mpnum import PrecisionContext

D2 = RegionSpec(2, 0, "3/1000")
D4 = RegionSpec(4, 0, "3/1000")


@pytest.fixture(scope="session")
def ctx64():
    return PrecisionContext(64)


@pytest.fixture(scope="session")
def ctx320():
    return PrecisionContext(mpnum.FLOW_DIGITS)


@pytest.fixture(scope="session")
def sigma_d2(ctx64):
    return build_region_cm(D2, ctx64)


@pytest.fixture(scope="session")
def sigma_d4(ctx64):
    return build_region_cm(D4, ctx64)


@pytest.fixture(scope="session")
def soe_d2(ctx320):
    from gaussent.soe import soe_quantify

    return soe_quantify(D2, ctx320)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
