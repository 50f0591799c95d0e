import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "geoseek", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("geoseek")

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """List of one-line PASS/FAIL verdicts, echoed in the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
