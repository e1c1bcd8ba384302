"""HTTP + WebSocket API bridging the engine to the interactive playground.

Scenario store and run registry are plain in-memory maps guarded by a lock;
inference sessions are isolated per WebSocket connection and process points
synchronously, so belief replies always arrive in the order points were sent.
"""

from __future__ import annotations

import asyncio
import itertools
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response

from . import __version__
from .errors import EngineError, ValidationError
from .geometry import Point2
from .io import (
    ScenarioDocument,
    archive_to_obj,
    canonical_json_bytes,
    load_scenario,
    save_scenario,
    scenario_to_obj,
)
from .legibility import goal_posterior, prediction_margin
from .qd import LegibilityObjective, MeasureDescriptor, map_elites
from .task import ScoreConfig, eligible_goals
from .workspace import router_for

DEFAULT_SESSION_TIMEOUT = 300.0


@dataclass
class RunRecord:
    run_id: str
    scenario_id: str
    doc: Optional[ScenarioDocument] = None  # scenario with run overrides applied
    status: str = "pending"  # pending | running | done | error
    best_score: Optional[float] = None
    error: Optional[str] = None
    archive_obj: Optional[dict] = None


class EngineState:
    def __init__(self, scenario_dir: Optional[Path] = None):
        self.scenarios: Dict[str, ScenarioDocument] = {}
        self.runs: Dict[str, RunRecord] = {}
        self.lock = threading.Lock()
        self._run_counter = itertools.count(1)
        if scenario_dir is not None:
            for path in sorted(Path(scenario_dir).glob("*.json")):
                try:
                    self.scenarios[path.stem] = load_scenario(path)
                except EngineError:
                    continue  # non-scenario JSON files are skipped

    def next_run_id(self) -> str:
        return f"run-{next(self._run_counter)}"


def _override_qd(doc: ScenarioDocument, overrides: dict) -> ScenarioDocument:
    from dataclasses import replace

    allowed = {
        "total_iterations",
        "init_iterations",
        "seed",
        "gaussian_sigma",
        "item_samples_per_item",
        "obstacle_add_samples",
        "obstacle_side",
        "max_obstacles",
        "max_orders",
        "score_current_goal_only",
    }
    bad = set(overrides) - allowed
    if bad:
        raise ValidationError("overrides", f"unknown keys {sorted(bad)}")
    try:
        return replace(doc, qd=replace(doc.qd, **overrides))
    except (TypeError, ValueError) as exc:
        raise ValidationError("overrides", str(exc))


def execute_run(state: EngineState, run_id: str) -> None:
    with state.lock:
        record = state.runs[run_id]
        doc = record.doc or state.scenarios[record.scenario_id]
        record.status = "running"
    try:
        objective = LegibilityObjective(
            doc.task,
            doc.legibility,
            ScoreConfig(
                return_home=doc.sim.return_home,
                max_orders=doc.qd.max_orders,
                score_current_goal_only=doc.qd.score_current_goal_only,
            ),
        )
        archive = map_elites(
            objective, MeasureDescriptor(), doc.qd, doc.workspace
        )
        with state.lock:
            record.archive_obj = archive_to_obj(archive)
            record.best_score = archive.best().legibility
            record.status = "done"
    except Exception as exc:
        with state.lock:
            record.status = "error"
            record.error = str(exc)


def _error_response(status: int, message: str, path: Optional[str] = None):
    body = {"error": {"message": message}}
    if path is not None:
        body["error"]["path"] = path
    return JSONResponse(body, status_code=status)


class InferenceSession:
    """Subtask-state machine feeding observed points into the goal posterior."""

    def __init__(self, doc: ScenarioDocument):
        self.doc = doc
        self.router = router_for(doc.workspace)
        self.completed: set = set()
        self.origin: Point2 = doc.workspace.start
        self.prefix: list = []
        self.seq = 0

    def eligible(self) -> tuple:
        return eligible_goals(self.doc.task, self.completed)

    def set_state(self, completed) -> None:
        known = {t.id for t in self.doc.task.subtasks}
        bad = [c for c in completed if c not in known]
        if bad:
            raise ValidationError("subtask_state", f"unknown subtasks {bad}")
        self.completed = set(completed)
        self.prefix = []

    def complete_subtask(self, subtask_id: str) -> None:
        sub = self.doc.task.by_id(subtask_id)
        self.completed.add(subtask_id)
        self.prefix = []
        if not self.doc.sim.return_home:
            self.origin = self.doc.workspace.item_position(sub.goal_item)

    def observe(self, point) -> dict:
        goals = self.eligible()
        if not goals:
            raise EngineError("no eligible goals; task already complete")
        p = Point2(float(point[0]), float(point[1]))
        if self.router.grid.is_blocked(p):
            raise EngineError("point lies in a blocked cell")
        if not self.prefix and p.dist(self.origin) > self.router.grid.resolution + 1e-9:
            raise EngineError("first point must be at the subtask origin")
        self.prefix.append(p)
        belief = goal_posterior(
            self.doc.workspace,
            self.origin,
            self.prefix,
            goals,
            self.doc.legibility,
            self.router,
        )
        top = belief.argmax()
        return {
            "type": "belief",
            "entries": dict(belief.entries),
            "argmax": top,
            "margin": prediction_margin(belief),
            "committed": belief.probability(top)
            >= self.doc.sim.confidence_threshold,
        }


def create_app(
    scenario_dir: Optional[Path] = None,
    session_timeout: float = DEFAULT_SESSION_TIMEOUT,
    run_in_thread: bool = True,
) -> FastAPI:
    app = FastAPI(title="legiworks", version=__version__)
    state = EngineState(scenario_dir)
    app.state.engine = state

    @app.get("/api/health")
    def health():
        return {"version": __version__}

    @app.get("/api/scenarios")
    def list_scenarios():
        with state.lock:
            return {
                "scenarios": [
                    {"id": sid, "template": doc.workspace.template}
                    for sid, doc in sorted(state.scenarios.items())
                ]
            }

    @app.get("/api/scenarios/{scenario_id}")
    def get_scenario(scenario_id: str):
        with state.lock:
            doc = state.scenarios.get(scenario_id)
        if doc is None:
            return _error_response(404, f"unknown scenario {scenario_id!r}")
        return Response(content=save_scenario(doc), media_type="application/json")

    @app.post("/api/scenarios")
    async def upload_scenario(body: dict):
        scenario_id = body.get("id")
        if not isinstance(scenario_id, str) or not scenario_id:
            return _error_response(400, "missing scenario id", "id")
        try:
            doc = load_scenario(
                canonical_json_bytes(body.get("scenario"))
                if isinstance(body.get("scenario"), dict)
                else b"null"
            )
        except ValidationError as exc:
            return _error_response(400, exc.reason, f"scenario.{exc.path}")
        except EngineError as exc:
            return _error_response(400, str(exc), "scenario")
        with state.lock:
            state.scenarios[scenario_id] = doc
        return {"id": scenario_id}

    @app.post("/api/runs")
    async def start_run(body: dict):
        scenario_id = body.get("scenario")
        overrides = body.get("overrides") or {}
        with state.lock:
            if scenario_id not in state.scenarios:
                return _error_response(404, f"unknown scenario {scenario_id!r}")
            run_id = body.get("run_id") or state.next_run_id()
            if run_id in state.runs:
                return _error_response(409, f"duplicate run id {run_id!r}")
            try:
                doc = _override_qd(state.scenarios[scenario_id], overrides)
            except ValidationError as exc:
                return _error_response(400, exc.reason, exc.path)
            state.runs[run_id] = RunRecord(run_id, scenario_id, doc=doc)
        if run_in_thread:
            thread = threading.Thread(
                target=execute_run, args=(state, run_id), daemon=True
            )
            thread.start()
        else:
            await asyncio.to_thread(execute_run, state, run_id)
        return {"run_id": run_id}

    @app.get("/api/runs/{run_id}")
    def run_status(run_id: str):
        with state.lock:
            record = state.runs.get(run_id)
            if record is None:
                return _error_response(404, f"unknown run {run_id!r}")
            return {
                "run_id": record.run_id,
                "scenario": record.scenario_id,
                "status": record.status,
                "best_score": record.best_score,
                "error": record.error,
            }

    @app.get("/api/runs/{run_id}/archive")
    def run_archive(run_id: str):
        with state.lock:
            record = state.runs.get(run_id)
            if record is None:
                return _error_response(404, f"unknown run {run_id!r}")
            if record.status != "done" or record.archive_obj is None:
                return _error_response(404, f"run {run_id!r} has no archive yet")
            return Response(
                content=canonical_json_bytes(record.archive_obj),
                media_type="application/json",
            )

    @app.websocket("/api/inference")
    async def inference(ws: WebSocket):
        await ws.accept()
        session: Optional[InferenceSession] = None
        try:
            while True:
                try:
                    message = await asyncio.wait_for(
                        ws.receive_json(), timeout=session_timeout
                    )
                except asyncio.TimeoutError:
                    await ws.send_json({"type": "error", "message": "session timeout"})
                    await ws.close()
                    return
                except (ValueError, KeyError):
                    await ws.send_json(
                        {"type": "error", "message": "malformed message"}
                    )
                    continue
                if not isinstance(message, dict) or "type" not in message:
                    await ws.send_json(
                        {"type": "error", "message": "malformed message"}
                    )
                    continue
                kind = message["type"]
                seq = message.get("seq")
                try:
                    if kind == "start":
                        with state.lock:
                            doc = state.scenarios.get(message.get("scenario"))
                        if doc is None:
                            await ws.send_json(
                                {
                                    "type": "error",
                                    "message": "unknown scenario",
                                    "seq": seq,
                                }
                            )
                            continue
                        session = InferenceSession(doc)
                        completed = (message.get("subtask_state") or {}).get(
                            "completed", []
                        )
                        session.set_state(completed)
                        await ws.send_json(
                            {
                                "type": "started",
                                "scenario": message.get("scenario"),
                                "eligible": list(session.eligible()),
                                "origin": list(session.origin),
                                "seq": seq,
                            }
                        )
                    elif kind == "point":
                        if session is None:
                            raise EngineError("no session; send start first")
                        reply = session.observe(message["p"])
                        session.seq += 1
                        reply["seq"] = seq if seq is not None else session.seq
                        await ws.send_json(reply)
                    elif kind == "complete_subtask":
                        if session is None:
                            raise EngineError("no session; send start first")
                        session.complete_subtask(str(message["id"]))
                        await ws.send_json(
                            {
                                "type": "subtask_completed",
                                "eligible": list(session.eligible()),
                                "origin": list(session.origin),
                                "seq": seq,
                            }
                        )
                    else:
                        await ws.send_json(
                            {
                                "type": "error",
                                "message": f"unknown message type {kind!r}",
                                "seq": seq,
                            }
                        )
                except (EngineError, KeyError, ValueError, TypeError) as exc:
                    await ws.send_json(
                        {"type": "error", "message": str(exc), "seq": seq}
                    )
        except WebSocketDisconnect:
            return

    return app
