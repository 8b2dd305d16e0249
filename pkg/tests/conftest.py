import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("QUASISPEC_OUTPUT_DIR", raising=False)
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    import sys

    for mod in list(sys.modules.values()):
        res = getattr(mod, "ACCEPTANCE_RESULTS", None)
        if isinstance(res, dict) and res:
            terminalreporter.section("acceptance criteria")
            for k in sorted(res):
                terminalreporter.write_line(res[k])
            break
