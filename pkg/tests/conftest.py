import json
from functools import lru_cache
from pathlib import Path

import pytest
from hypothesis import settings

from halfline_spectral import build_model

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")

ORACLE_PATH = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def oracle():
    return json.loads(ORACLE_PATH.read_text())


@lru_cache(maxsize=None)
def model(text):
    return build_model(text)
