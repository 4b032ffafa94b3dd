import json
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"
OPB_DIR = DATA_DIR / "opb"
INVALID_OPB_DIR = DATA_DIR / "opb_invalid"


@pytest.fixture
def golden():
    with open(OPB_DIR / "golden.json") as f:
        return json.load(f)


@pytest.fixture
def opb_dir() -> Path:
    return OPB_DIR


@pytest.fixture
def invalid_opb_dir() -> Path:
    return INVALID_OPB_DIR
