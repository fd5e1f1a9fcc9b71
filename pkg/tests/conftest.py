import pytest

from oscibound.potential import BumpProfile, PotentialSpec, single_pair_spec


@pytest.fixture(scope="session")
def s1():
    return single_pair_spec()


@pytest.fixture(scope="session")
def s1_sine():
    return single_pair_spec(amplitude=1j)


@pytest.fixture(scope="session")
def silent_spec():
    """Valid geometry with every amplitude zero, so V = 0."""
    return single_pair_spec(amplitude=0.0)


@pytest.fixture(scope="session")
def two_pair():
    p = BumpProfile(1.0)
    return PotentialSpec.from_modes(1.0, [((1, 0), 1.0, p), ((1, 1), 0.5, p)])


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda l: l.split()[1]):
            terminalreporter.write_line(line)
