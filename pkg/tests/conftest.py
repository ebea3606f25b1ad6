import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pokeleague.dex import default_dex_path, dex_fingerprint, load_dex


@pytest.fixture(scope="session")
def dex():
    return load_dex(default_dex_path())


@pytest.fixture(scope="session")
def bundled_fingerprint():
    return dex_fingerprint(default_dex_path())


@pytest.fixture(scope="session")
def dex_doc():
    """The raw bundled dex document, for building broken variants."""
    return json.loads(default_dex_path().read_text(encoding="utf-8"))


@pytest.fixture()
def write_dex(tmp_path):
    """Write a (possibly modified) dex document to a temp file."""

    def _write(doc: dict, name: str = "dex.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    return _write
