import json
from dataclasses import replace
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from legiworks.io import (
    ScenarioDocument,
    load_template,
    save_scenario,
    scenario_to_obj,
)
from legiworks.legibility import goal_posterior
from legiworks.server import create_app
from legiworks.workspace import router_for

from conftest import free_workspace, simple_task


@pytest.fixture(scope="module")
def scenario_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scenarios")
    doc = load_template("tabletop")
    doc = replace(doc, qd=replace(doc.qd, total_iterations=12, init_iterations=6))
    (d / "tabletop_small.json").write_bytes(save_scenario(doc))
    ws = free_workspace([(0.3, 1.6), (1.7, 1.6)])
    pair = ScenarioDocument(workspace=ws, task=simple_task(ws))
    (d / "pair.json").write_bytes(save_scenario(pair))
    return d


@pytest.fixture(scope="module")
def client(scenario_dir):
    app = create_app(scenario_dir, run_in_thread=False)
    with TestClient(app) as c:
        yield c


class TestHttpApi:
    def test_health_reports_version(self, client):
        body = client.get("/api/health").json()
        from legiworks import __version__

        assert body["version"] == __version__

    def test_scenario_list_reflects_dir(self, client):
        body = client.get("/api/scenarios").json()
        ids = [s["id"] for s in body["scenarios"]]
        assert ids == ["pair", "tabletop_small"]

    def test_get_scenario_canonical_bytes(self, client, scenario_dir):
        r = client.get("/api/scenarios/pair")
        assert r.status_code == 200
        assert r.content == (scenario_dir / "pair.json").read_bytes()

    def test_unknown_scenario_404(self, client):
        assert client.get("/api/scenarios/ghost").status_code == 404

    def test_upload_then_fetch_round_trips(self, client):
        ws = free_workspace([(1.0, 1.5)])
        doc = ScenarioDocument(workspace=ws, task=simple_task(ws))
        obj = scenario_to_obj(doc)
        r = client.post("/api/scenarios", json={"id": "uploaded", "scenario": obj})
        assert r.status_code == 200
        fetched = client.get("/api/scenarios/uploaded")
        assert fetched.content == save_scenario(doc)

    def test_upload_invalid_scenario_400_with_path(self, client):
        ws = free_workspace([(1.0, 1.5)])
        obj = scenario_to_obj(ScenarioDocument(workspace=ws, task=simple_task(ws)))
        obj["task"]["subtasks"][0]["goal_item"] = "ghost"
        r = client.post("/api/scenarios", json={"id": "bad", "scenario": obj})
        assert r.status_code == 400
        assert "goal_item" in r.json()["error"]["path"]

    def test_run_lifecycle(self, client):
        r = client.post(
            "/api/runs",
            json={
                "scenario": "tabletop_small",
                "run_id": "test-run",
                "overrides": {"seed": 1},
            },
        )
        assert r.status_code == 200
        status = client.get("/api/runs/test-run").json()
        assert status["status"] == "done"
        assert status["best_score"] is not None
        archive = client.get("/api/runs/test-run/archive")
        assert archive.status_code == 200
        cells = json.loads(archive.content)["cells"]
        assert len(cells) >= 1

    def test_duplicate_run_id_409(self, client):
        client.post(
            "/api/runs", json={"scenario": "pair", "run_id": "dup"}
        )
        r = client.post("/api/runs", json={"scenario": "pair", "run_id": "dup"})
        assert r.status_code == 409

    def test_unknown_run_404(self, client):
        assert client.get("/api/runs/nope").status_code == 404
        assert client.get("/api/runs/nope/archive").status_code == 404

    def test_archive_matches_cli_for_same_seed(self, client, scenario_dir, tmp_path):
        from legiworks.cli import main

        out = tmp_path / "cli"
        assert (
            main(
                [
                    "optimize",
                    str(scenario_dir / "tabletop_small.json"),
                    "--seed",
                    "2",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        r = client.post(
            "/api/runs",
            json={
                "scenario": "tabletop_small",
                "run_id": "cross-check",
                "overrides": {"seed": 2},
            },
        )
        assert r.status_code == 200
        archive = client.get("/api/runs/cross-check/archive")
        cli_cells = json.loads((out / "archive.json").read_bytes())["cells"]
        api_cells = json.loads(archive.content)["cells"]
        assert set(cli_cells) == set(api_cells)


class TestInferenceStream:
    def test_uniform_belief_at_start(self, client):
        with client.websocket_connect("/api/inference") as ws:
            ws.send_json({"type": "start", "scenario": "pair", "seq": 0})
            started = ws.receive_json()
            assert started["type"] == "started"
            assert started["eligible"] == ["g0", "g1"]
            origin = started["origin"]
            ws.send_json({"type": "point", "p": origin, "seq": 1})
            belief = ws.receive_json()
            assert belief["type"] == "belief"
            assert belief["seq"] == 1
            assert belief["entries"]["g0"] == pytest.approx(0.5, abs=1e-9)
            assert belief["committed"] is False

    def test_tracing_path_to_goal_commits(self, client):
        doc = load_template("tabletop")
        ws_doc = None
        with client.websocket_connect("/api/inference") as sock:
            sock.send_json({"type": "start", "scenario": "pair"})
            started = sock.receive_json()
            origin = tuple(started["origin"])
            # trace the planner's own path toward g1
            from legiworks.io import load_scenario
            from legiworks.server import EngineState

            # fetch the scenario the server holds to plan the same path
            raw = client.get("/api/scenarios/pair").content
            ws_doc = load_scenario(raw)
            router = router_for(ws_doc.workspace)
            path = router.plan(origin, ws_doc.workspace.item_position("g1"))
            last = None
            for i, p in enumerate(path.waypoints):
                sock.send_json({"type": "point", "p": [p[0], p[1]], "seq": i})
                last = sock.receive_json()
                assert last["seq"] == i
            assert last["argmax"] == "g1"
            assert last["committed"] is True

    def test_replay_matches_engine(self, client):
        raw = client.get("/api/scenarios/pair").content
        from legiworks.io import load_scenario

        doc = load_scenario(raw)
        router = router_for(doc.workspace)
        path = router.plan(doc.workspace.start, doc.workspace.item_position("g0"))
        points = [tuple(p) for p in path.waypoints]
        beliefs = []
        with client.websocket_connect("/api/inference") as sock:
            sock.send_json({"type": "start", "scenario": "pair"})
            sock.receive_json()
            for p in points:
                sock.send_json({"type": "point", "p": list(p)})
                beliefs.append(sock.receive_json()["entries"])
        for i in range(1, len(points) + 1):
            want = goal_posterior(
                doc.workspace,
                doc.workspace.start,
                points[:i],
                ["g0", "g1"],
                doc.legibility,
            )
            for g, p in want.entries.items():
                assert beliefs[i - 1][g] == pytest.approx(p, abs=1e-9)

    def test_out_of_bounds_point_keeps_session(self, client):
        with client.websocket_connect("/api/inference") as sock:
            sock.send_json({"type": "start", "scenario": "pair"})
            started = sock.receive_json()
            sock.send_json({"type": "point", "p": [99.0, 99.0]})
            err = sock.receive_json()
            assert err["type"] == "error"
            sock.send_json({"type": "point", "p": started["origin"]})
            belief = sock.receive_json()
            assert belief["type"] == "belief"

    def test_malformed_message_keeps_session(self, client):
        with client.websocket_connect("/api/inference") as sock:
            sock.send_json({"no_type": True})
            err = sock.receive_json()
            assert err["type"] == "error"
            sock.send_json({"type": "start", "scenario": "pair"})
            assert sock.receive_json()["type"] == "started"

    def test_complete_subtask_advances_state(self, client):
        with client.websocket_connect("/api/inference") as sock:
            sock.send_json({"type": "start", "scenario": "pair"})
            started = sock.receive_json()
            sock.send_json({"type": "complete_subtask", "id": "tg0"})
            advanced = sock.receive_json()
            assert advanced["type"] == "subtask_completed"
            assert advanced["eligible"] == ["g1"]
            sock.send_json({"type": "point", "p": advanced["origin"]})
            belief = sock.receive_json()
            assert belief["entries"] == {"g1": 1.0}

    def test_concurrent_sessions_stay_isolated(self, client):
        with client.websocket_connect("/api/inference") as a:
            with client.websocket_connect("/api/inference") as b:
                a.send_json({"type": "start", "scenario": "pair"})
                b.send_json({"type": "start", "scenario": "pair"})
                origin_a = a.receive_json()["origin"]
                origin_b = b.receive_json()["origin"]
                # interleave points; replies must track each session's own seq
                for i in range(4):
                    a.send_json({"type": "point", "p": origin_a, "seq": 100 + i})
                    b.send_json({"type": "point", "p": origin_b, "seq": 200 + i})
                    ra = a.receive_json()
                    rb = b.receive_json()
                    assert ra["seq"] == 100 + i
                    assert rb["seq"] == 200 + i
