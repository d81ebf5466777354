import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # keep the call-phase report so fixtures can see the outcome at teardown
    outcome = yield
    if call.when == "call":
        item.rep_call = outcome.get_result()
