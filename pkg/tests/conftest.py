import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from legiworks.geometry import ConvexPolygon
from legiworks.io import load_template
from legiworks.legibility import LegibilityParams
from legiworks.task import Subtask, Task
from legiworks.workspace import Item, Workspace


@pytest.fixture(scope="session")
def tabletop():
    return load_template("tabletop")


@pytest.fixture(scope="session")
def warehouse():
    return load_template("warehouse")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def free_workspace(goals, bounds=((0.0, 0.0), (2.0, 2.0)), start=(1.0, 0.1),
                   radius=0.05, template="tabletop", obstacles=()):
    """Obstacle-free workspace with the given goal positions."""
    items = tuple(
        Item(f"g{i}", pos, radius) for i, pos in enumerate(goals)
    )
    return Workspace(
        bounds=bounds,
        start=start,
        items=items,
        virtual_obstacles=tuple(obstacles),
        template=template,
    )


def simple_task(workspace, precedence=(), agents=None):
    agents = agents or {}
    subtasks = tuple(
        Subtask(f"t{it.id}", it.id, agents.get(it.id, "human"))
        for it in workspace.items
    )
    return Task(subtasks, tuple(precedence))
