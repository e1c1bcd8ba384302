"""Scenario and archive file formats with validation on load.

Documents are JSON with a fixed schema. Serialization is canonical: sorted
keys, two-space indentation, floats printed with 9 significant digits, so a
document that has been through one save/load cycle round-trips byte for byte.
"""

from __future__ import annotations

import io as _io
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .errors import (
    CyclicPrecedence,
    ParseError,
    ValidationError,
    VersionError,
)
from .geometry import ConvexPolygon, Point2
from .legibility import LegibilityParams
from .qd import Archive, ArchiveCell, MeasureDescriptor, QDConfig
from .task import Subtask, Task, check_acyclic
from .workspace import Item, Workspace, workspace_violation

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SimSettings:
    return_home: bool = True
    confidence_threshold: float = 0.8


@dataclass(frozen=True)
class ScenarioDocument:
    workspace: Workspace
    task: Task
    legibility: LegibilityParams = LegibilityParams()
    qd: QDConfig = QDConfig()
    sim: SimSettings = SimSettings()
    metadata: Optional[dict] = None
    format_version: int = FORMAT_VERSION


# -- canonical JSON writer -----------------------------------------------------


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite numbers are not serializable")
    return format(x, ".9g")


def canonical_round(x: float) -> float:
    return float(_format_float(float(x)))


def _write_json(value, out: _io.StringIO, indent: int) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.write("{}")
            return
        out.write("{\n")
        keys = sorted(value)
        for i, k in enumerate(keys):
            out.write(pad + "  " + json.dumps(str(k)) + ": ")
            _write_json(value[k], out, indent + 1)
            out.write(",\n" if i < len(keys) - 1 else "\n")
        out.write(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.write("[]")
            return
        out.write("[\n")
        for i, v in enumerate(value):
            out.write(pad + "  ")
            _write_json(v, out, indent + 1)
            out.write(",\n" if i < len(value) - 1 else "\n")
        out.write(pad + "]")
    elif isinstance(value, bool):
        out.write("true" if value else "false")
    elif isinstance(value, int):
        out.write(str(value))
    elif isinstance(value, float):
        out.write(_format_float(value))
    elif isinstance(value, str):
        out.write(json.dumps(value))
    elif value is None:
        out.write("null")
    else:
        raise TypeError(f"cannot serialize {type(value)}")


def canonical_json_bytes(obj) -> bytes:
    buf = _io.StringIO()
    _write_json(obj, buf, 0)
    buf.write("\n")
    return buf.getvalue().encode("utf-8")


# -- object <-> plain structures ----------------------------------------------


def _point_obj(p) -> list:
    return [float(p[0]), float(p[1])]


def workspace_to_obj(ws: Workspace) -> dict:
    return {
        "bounds": {"min": _point_obj(ws.bounds[0]), "max": _point_obj(ws.bounds[1])},
        "start": _point_obj(ws.start),
        "items": [
            {"id": it.id, "pos": _point_obj(it.pos), "radius": float(it.radius)}
            for it in ws.items
        ],
        "virtual_obstacles": [
            {"vertices": [_point_obj(v) for v in poly.vertices]}
            for poly in ws.virtual_obstacles
        ],
        "fixed_obstacles": [
            {"vertices": [_point_obj(v) for v in poly.vertices]}
            for poly in ws.fixed_obstacles
        ],
        "template": ws.template,
    }


def task_to_obj(task: Task) -> dict:
    return {
        "subtasks": [
            {"id": t.id, "goal_item": t.goal_item, "agent": t.agent}
            for t in task.subtasks
        ],
        "precedence": [[a, b] for a, b in task.precedence],
    }


def scenario_to_obj(doc: ScenarioDocument) -> dict:
    obj = {
        "format_version": doc.format_version,
        "workspace": workspace_to_obj(doc.workspace),
        "task": task_to_obj(doc.task),
        "legibility": {
            "beta": float(doc.legibility.beta),
            "penalty_c": float(doc.legibility.penalty_c),
            "checkpoints": [float(f) for f in doc.legibility.checkpoints],
        },
        "qd": {
            "total_iterations": doc.qd.total_iterations,
            "init_iterations": doc.qd.init_iterations,
            "seed": doc.qd.seed,
            "gaussian_sigma": doc.qd.gaussian_sigma,
            "item_samples_per_item": doc.qd.item_samples_per_item,
            "obstacle_add_samples": doc.qd.obstacle_add_samples,
            "obstacle_side": doc.qd.obstacle_side,
            "max_obstacles": doc.qd.max_obstacles,
            "max_orders": doc.qd.max_orders,
            "score_current_goal_only": doc.qd.score_current_goal_only,
        },
        "sim": {
            "return_home": doc.sim.return_home,
            "confidence_threshold": float(doc.sim.confidence_threshold),
        },
    }
    if doc.metadata is not None:
        obj["metadata"] = doc.metadata
    return obj


def save_scenario(doc: ScenarioDocument) -> bytes:
    """Canonical bytes; equal documents serialize identically."""
    return canonical_json_bytes(scenario_to_obj(doc))


# -- validated loading ---------------------------------------------------------


class _Reader:
    """Typed field access that raises ValidationError with the field path."""

    def __init__(self, obj, path: str):
        self.obj = obj
        self.path = path

    def fail(self, reason: str):
        raise ValidationError(self.path, reason)

    def child(self, key, cls=None):
        if not isinstance(self.obj, dict):
            self.fail("expected an object")
        if key not in self.obj:
            self.fail(f"missing key {key!r}")
        sub = _Reader(self.obj[key], f"{self.path}.{key}" if self.path else key)
        if cls is not None:
            sub.require(cls)
        return sub

    def opt(self, key, default=None):
        if not isinstance(self.obj, dict):
            self.fail("expected an object")
        if key not in self.obj or self.obj[key] is None:
            return None
        return _Reader(self.obj[key], f"{self.path}.{key}" if self.path else key)

    def require(self, cls):
        ok = isinstance(self.obj, cls)
        if cls is float:
            ok = isinstance(self.obj, (int, float)) and not isinstance(self.obj, bool)
        if cls is int:
            ok = isinstance(self.obj, int) and not isinstance(self.obj, bool)
        if not ok:
            self.fail(f"expected {getattr(cls, '__name__', cls)}")
        return self.obj

    def number(self) -> float:
        return float(self.require(float))

    def items(self):
        self.require(list)
        for i, v in enumerate(self.obj):
            yield _Reader(v, f"{self.path}[{i}]")

    def point(self) -> Point2:
        self.require(list)
        if len(self.obj) != 2:
            self.fail("expected [x, y]")
        return Point2(
            _Reader(self.obj[0], f"{self.path}[0]").number(),
            _Reader(self.obj[1], f"{self.path}[1]").number(),
        )


def _read_polygons(reader: _Reader) -> tuple:
    polys = []
    for entry in reader.items():
        verts = entry.child("vertices")
        pts = [v.point() for v in verts.items()]
        try:
            polys.append(ConvexPolygon(pts))
        except Exception as exc:
            entry.fail(str(exc))
    return tuple(polys)


def _read_workspace(reader: _Reader) -> Workspace:
    bounds = reader.child("bounds")
    ws = Workspace(
        bounds=(bounds.child("min").point(), bounds.child("max").point()),
        start=reader.child("start").point(),
        items=tuple(
            Item(
                id=str(e.child("id").require(str)),
                pos=e.child("pos").point(),
                radius=e.child("radius").number(),
            )
            for e in reader.child("items").items()
        ),
        virtual_obstacles=_read_polygons(reader.child("virtual_obstacles")),
        fixed_obstacles=_read_polygons(reader.child("fixed_obstacles")),
        template=str(reader.child("template").require(str)),
    )
    violation = workspace_violation(ws)
    if violation is not None:
        reader.fail(violation)
    return ws


def _read_task(reader: _Reader, workspace: Workspace) -> Task:
    subtasks = []
    item_ids = {it.id for it in workspace.items}
    for e in reader.child("subtasks").items():
        goal = str(e.child("goal_item").require(str))
        if goal not in item_ids:
            e.child("goal_item").fail(f"unknown item {goal!r}")
        agent_reader = e.opt("agent")
        agent = str(agent_reader.require(str)) if agent_reader else "human"
        try:
            subtasks.append(Subtask(str(e.child("id").require(str)), goal, agent))
        except ValueError as exc:
            e.fail(str(exc))
    edges = []
    known = {t.id for t in subtasks}
    for e in reader.child("precedence").items():
        e.require(list)
        if len(e.obj) != 2:
            e.fail("expected [before, after]")
        a, b = str(e.obj[0]), str(e.obj[1])
        if a not in known or b not in known:
            e.fail(f"edge references unknown subtask ({a!r}, {b!r})")
        edges.append((a, b))
    try:
        task = Task(tuple(subtasks), tuple(edges))
        check_acyclic(task)
    except CyclicPrecedence as exc:
        reader.child("precedence").fail("cycle " + "->".join(exc.cycle))
    except ValueError as exc:
        reader.fail(str(exc))
    return task


def _read_legibility(reader: Optional[_Reader]) -> LegibilityParams:
    if reader is None:
        return LegibilityParams()
    kwargs = {}
    for key in ("beta", "penalty_c"):
        sub = reader.opt(key)
        if sub is not None:
            kwargs[key] = sub.number()
    cps = reader.opt("checkpoints")
    if cps is not None:
        kwargs["checkpoints"] = tuple(e.number() for e in cps.items())
    try:
        return LegibilityParams(**kwargs)
    except ValueError as exc:
        reader.fail(str(exc))


def _read_qd(reader: Optional[_Reader]) -> QDConfig:
    if reader is None:
        return QDConfig()
    ints = (
        "total_iterations",
        "init_iterations",
        "seed",
        "item_samples_per_item",
        "obstacle_add_samples",
        "max_obstacles",
        "max_orders",
    )
    kwargs = {}
    for key in ints:
        sub = reader.opt(key)
        if sub is not None:
            kwargs[key] = sub.require(int)
    for key in ("gaussian_sigma", "obstacle_side"):
        sub = reader.opt(key)
        if sub is not None:
            kwargs[key] = sub.number()
    flag = reader.opt("score_current_goal_only")
    if flag is not None:
        kwargs["score_current_goal_only"] = flag.require(bool)
    try:
        return QDConfig(**kwargs)
    except ValueError as exc:
        reader.fail(str(exc))


def _read_sim(reader: Optional[_Reader]) -> SimSettings:
    if reader is None:
        return SimSettings()
    kwargs = {}
    rh = reader.opt("return_home")
    if rh is not None:
        kwargs["return_home"] = rh.require(bool)
    ct = reader.opt("confidence_threshold")
    if ct is not None:
        kwargs["confidence_threshold"] = ct.number()
    return SimSettings(**kwargs)


def load_scenario(source: Union[str, Path, bytes]) -> ScenarioDocument:
    """Parse and fully validate a scenario document.

    Raises ParseError for malformed JSON, VersionError for an unsupported
    format_version, and ValidationError (with the violating field path) for
    schema or semantic violations.
    """
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = bytes(source)
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed scenario document: {exc}") from exc
    root = _Reader(obj, "")
    version = root.child("format_version").require(int)
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {version}")
    workspace = _read_workspace(root.child("workspace"))
    task = _read_task(root.child("task"), workspace)
    legibility = _read_legibility(root.opt("legibility"))
    qd = _read_qd(root.opt("qd"))
    sim = _read_sim(root.opt("sim"))
    metadata = root.opt("metadata")
    return ScenarioDocument(
        workspace=workspace,
        task=task,
        legibility=legibility,
        qd=qd,
        sim=sim,
        metadata=metadata.obj if metadata is not None else None,
        format_version=version,
    )


# -- archives ------------------------------------------------------------------


def archive_to_obj(archive: Archive) -> dict:
    cells = {}
    for key in archive.sorted_keys():
        cell = archive.cells[key]
        cells[f"{key[0]},{key[1]}"] = {
            "score": float(cell.legibility),
            "features": [float(cell.features[0]), int(cell.features[1])],
            "workspace": workspace_to_obj(cell.workspace),
        }
    return {
        "format_version": FORMAT_VERSION,
        "descriptor": {
            "min_distance_bins": archive.descriptor.min_distance_bins,
            "ordering_cardinality": archive.descriptor.ordering_cardinality,
            "row_tolerance": archive.descriptor.row_tolerance,
        },
        "cells": cells,
    }


def save_archive(archive: Archive) -> bytes:
    """Canonical archive bytes: cells keyed "i,j", user-facing scores."""
    return canonical_json_bytes(archive_to_obj(archive))


def load_archive(source: Union[str, Path, bytes]) -> Archive:
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = bytes(source)
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed archive document: {exc}") from exc
    root = _Reader(obj, "")
    version = root.child("format_version").require(int)
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {version}")
    desc_reader = root.opt("descriptor")
    descriptor = MeasureDescriptor()
    if desc_reader is not None:
        rt = desc_reader.opt("row_tolerance")
        descriptor = MeasureDescriptor(
            min_distance_bins=desc_reader.child("min_distance_bins").require(int),
            ordering_cardinality=desc_reader.child("ordering_cardinality").require(int),
            row_tolerance=rt.number() if rt is not None else None,
        )
    archive = Archive(descriptor)
    for key_str, cell_reader in (
        (k, _Reader(v, f"cells.{k}")) for k, v in root.child("cells").obj.items()
    ):
        try:
            i, j = (int(part) for part in key_str.split(","))
        except ValueError:
            raise ValidationError(f"cells.{key_str}", "key must be 'i,j'")
        ws = _read_workspace(cell_reader.child("workspace"))
        score = cell_reader.child("score").number()
        features = cell_reader.child("features")
        features.require(list)
        raw = (
            _Reader(features.obj[0], features.path + "[0]").number(),
            _Reader(features.obj[1], features.path + "[1]").require(int),
        )
        archive.cells[(i, j)] = ArchiveCell(ws, -score, raw)
    return archive


def archive_csv(archive: Archive) -> str:
    """Delimited summary (one row per cell) for heatmap plotting."""
    lines = ["min_distance_bin,ordering_bin,score"]
    for key in archive.sorted_keys():
        cell = archive.cells[key]
        lines.append(f"{key[0]},{key[1]},{_format_float(cell.legibility)}")
    return "\n".join(lines) + "\n"


# -- canonicalization and templates ---------------------------------------------


def canonical_scenario(doc: ScenarioDocument) -> ScenarioDocument:
    """Round all floats to the canonical 9-significant-digit form."""
    return load_scenario(save_scenario(doc))


def template_path(name: str):
    return resources.files("legiworks") / "templates" / f"{name}.json"


def load_template(name: str) -> ScenarioDocument:
    """Shipped scenario template ('tabletop' or 'warehouse')."""
    return load_scenario(template_path(name).read_bytes())
