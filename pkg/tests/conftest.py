import sys
from pathlib import Path

import pytest

STUB_DIR = Path(__file__).parent / "stubs"


@pytest.fixture
def stub_command():
    """Build an external-source command line for a named stub script."""

    def _command(name, *args):
        return [sys.executable, str(STUB_DIR / name), *map(str, args)]

    return _command
