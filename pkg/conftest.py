import logging
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from acnsim.geometry import Position, Scene  # noqa: E402


@pytest.fixture
def road_scene() -> Scene:
    """S between D1 and D2 on the Y road, 100 m links."""
    return Scene(
        source=Position(x=0.0, y=200.0),
        dest1=Position(x=0.0, y=100.0),
        dest2=Position(x=0.0, y=300.0),
        lambda_x=0.005,
        lambda_y=0.005,
        aloha_p=0.5,
        a1=0.8,
        a2=0.2,
        r1=0.5,
        r2=1.0,
    )


@pytest.fixture(autouse=True)
def _restore_root_logger():
    """The CLI reconfigures the root logger (basicConfig(force=True)); undo it between tests."""
    root = logging.getLogger()
    level, handlers = root.level, root.handlers[:]
    yield
    root.setLevel(level)
    root.handlers[:] = handlers
