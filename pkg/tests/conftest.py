import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def default_config():
    from uavd2d.scenario import ScenarioConfig
    return ScenarioConfig()


@pytest.fixture(scope="session")
def small_net():
    from uavd2d.scenario import ScenarioConfig, generate
    cfg = ScenarioConfig(num_cellular=6, num_d2d=3, uav_positions=((450.0, 0.0),))
    return generate(cfg, 3)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
