import os

import pytest

SLOW_ENV = "WHAE_RUN_SLOW"


def pytest_collection_modifyitems(config, items):
    if os.environ.get(SLOW_ENV) == "1":
        return
    skip_slow = pytest.mark.skip(reason=f"set {SLOW_ENV}=1 for acceptance runs")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
