import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from detector_fixtures import make_run


@pytest.fixture(scope="session")
def run_manifest(tmp_path_factory) -> Path:
    return make_run(tmp_path_factory.mktemp("run"), n=8, size=64, seed=3)
