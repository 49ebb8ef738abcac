# conftest.py
import os
import sys

import matplotlib
import pytest
from hypothesis import HealthCheck, settings

# Add the project root to sys.path to ensure 'ttl_agent' and 'scripts' are discoverable.
# This assumes conftest.py is in the root of the project.
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

matplotlib.use("Agg")

settings.register_profile(
    "ttl",
    derandomize=True,
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ttl"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running learning checks (run with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    """Tests pin their own seeds; a TTL_SEED in the environment must not leak in."""
    monkeypatch.delenv("TTL_SEED", raising=False)
