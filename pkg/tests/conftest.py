from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


import pytest

CRITERIA = {}  # criterion number -> (title, passed, detail)


@pytest.fixture
def criterion(request):
    """Record a one-line detail for an acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    detail = {}
    CRITERIA[number] = (title, False, detail)
    yield detail


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call" and marker.args[0] in CRITERIA:
        title, _, detail = CRITERIA[marker.args[0]]
        CRITERIA[marker.args[0]] = (title, report.passed, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, passed, detail = CRITERIA[number]
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if passed else 'FAIL'}"
                                    + (f" ({extra})" if extra else ""))
