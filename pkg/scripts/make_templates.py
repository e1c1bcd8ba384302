#!/usr/bin/env python3
"""Regenerate the shipped scenario templates in canonical form."""

from pathlib import Path

from legiworks.geometry import ConvexPolygon
from legiworks.io import ScenarioDocument, SimSettings, save_scenario
from legiworks.legibility import LegibilityParams
from legiworks.qd import QDConfig
from legiworks.task import Subtask, Task
from legiworks.workspace import Item, Workspace

TEMPLATES = Path(__file__).resolve().parents[1] / "src" / "legiworks" / "templates"


def tabletop() -> ScenarioDocument:
    # Clustered baseline: same-color square/circle pairs stacked per column.
    # All coordinates sit on 0.03 m grid cell centers.
    items = (
        Item("red_square", (0.315, 0.495), 0.03),
        Item("yellow_square", (0.435, 0.495), 0.03),
        Item("blue_square", (0.555, 0.495), 0.03),
        Item("red_circle", (0.315, 0.405), 0.03),
        Item("yellow_circle", (0.435, 0.405), 0.03),
        Item("blue_circle", (0.555, 0.405), 0.03),
    )
    ws = Workspace(
        bounds=((0.0, 0.0), (0.9, 0.6)),
        start=(0.435, 0.045),
        items=items,
        template="tabletop",
    )
    first = ("t_red_square", "t_red_circle", "t_yellow_square")
    second = ("t_yellow_circle", "t_blue_square", "t_blue_circle")
    subtasks = tuple(
        Subtask(f"t_{it.id}", it.id) for it in items
    )
    precedence = tuple((a, b) for a in first for b in second)
    task = Task(subtasks, precedence)
    return ScenarioDocument(
        workspace=ws,
        task=task,
        legibility=LegibilityParams(),
        qd=QDConfig(),
        sim=SimSettings(return_home=True, confidence_threshold=0.8),
    )


def warehouse() -> ScenarioDocument:
    # Three pick bins clustered along the far wall; two fixed storage racks
    # frame a central approach corridor. Coordinates on 0.1 m cell centers.
    items = (
        Item("bin_a", (4.85, 7.85), 0.35),
        Item("bin_b", (5.85, 7.85), 0.35),
        Item("bin_c", (6.85, 7.85), 0.35),
    )
    racks = (
        ConvexPolygon([(1.5, 3.0), (3.5, 3.0), (3.5, 6.0), (1.5, 6.0)]),
        ConvexPolygon([(8.5, 3.0), (10.5, 3.0), (10.5, 6.0), (8.5, 6.0)]),
    )
    ws = Workspace(
        bounds=((0.0, 0.0), (12.0, 9.0)),
        start=(5.85, 0.85),
        items=items,
        fixed_obstacles=racks,
        template="navigation",
    )
    task = Task(tuple(Subtask(f"t_{it.id}", it.id) for it in items))
    # an eager robot: clustered bins keep its belief too flat to ever commit,
    # while rearranged bins let it commit within a few steps
    return ScenarioDocument(
        workspace=ws,
        task=task,
        legibility=LegibilityParams(),
        qd=QDConfig(),
        sim=SimSettings(return_home=False, confidence_threshold=0.55),
    )


if __name__ == "__main__":
    TEMPLATES.mkdir(parents=True, exist_ok=True)
    for name, doc in (("tabletop", tabletop()), ("warehouse", warehouse())):
        path = TEMPLATES / f"{name}.json"
        path.write_bytes(save_scenario(doc))
        print("wrote", path)
