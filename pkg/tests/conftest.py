import json
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def oracles():
    """Frozen 40-digit mpmath reference values (see data/make_oracles.py)."""
    return json.loads((DATA / "oracles.json").read_text())
