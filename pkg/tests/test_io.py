import json

import numpy as np
import pytest

from legiworks.errors import ParseError, ValidationError, VersionError
from legiworks.geometry import ConvexPolygon
from legiworks.io import (
    ScenarioDocument,
    SimSettings,
    archive_csv,
    canonical_scenario,
    load_archive,
    load_scenario,
    load_template,
    save_archive,
    save_scenario,
    scenario_to_obj,
)
from legiworks.legibility import LegibilityParams
from legiworks.qd import Archive, ArchiveCell, MeasureDescriptor, QDConfig
from legiworks.task import Subtask, Task
from legiworks.workspace import Item, Workspace

from conftest import free_workspace, simple_task


def minimal_doc():
    ws = free_workspace([(1.0, 1.5)])
    return ScenarioDocument(workspace=ws, task=simple_task(ws))


def doc_bytes(**overrides):
    obj = scenario_to_obj(minimal_doc())
    obj.update(overrides)
    return json.dumps(obj).encode()


class TestScenarioRoundTrip:
    def test_minimal_document_loads(self):
        doc = load_scenario(save_scenario(minimal_doc()))
        assert len(doc.workspace.items) == 1
        assert len(doc.task.subtasks) == 1

    def test_round_trip_identity(self):
        doc = canonical_scenario(minimal_doc())
        assert load_scenario(save_scenario(doc)) == doc

    def test_canonical_bytes_idempotent(self):
        raw = save_scenario(minimal_doc())
        again = save_scenario(load_scenario(raw))
        assert raw == again

    def test_templates_are_canonical(self):
        for name in ("tabletop", "warehouse"):
            doc = load_template(name)
            assert save_scenario(load_scenario(save_scenario(doc))) == save_scenario(
                doc
            )

    def test_random_scenarios_round_trip(self, rng):
        for trial in range(40):
            n = int(rng.integers(1, 5))
            pts = []
            while len(pts) < n:
                cand = (
                    float(rng.uniform(0.2, 1.8)),
                    float(rng.uniform(0.8, 1.8)),
                )
                if all(
                    np.hypot(cand[0] - p[0], cand[1] - p[1]) > 0.15 for p in pts
                ):
                    pts.append(cand)
            ws = free_workspace(pts)
            doc = canonical_scenario(
                ScenarioDocument(workspace=ws, task=simple_task(ws))
            )
            data = save_scenario(doc)
            assert load_scenario(data) == doc
            assert save_scenario(load_scenario(data)) == data


class TestValidationErrors:
    def test_malformed_json(self):
        with pytest.raises(ParseError):
            load_scenario(b"{not json")

    def test_version_gate(self):
        with pytest.raises(VersionError):
            load_scenario(doc_bytes(format_version=2))

    def test_unknown_goal_item_path(self):
        obj = scenario_to_obj(minimal_doc())
        obj["task"]["subtasks"][0]["goal_item"] = "ghost"
        with pytest.raises(ValidationError) as err:
            load_scenario(json.dumps(obj).encode())
        assert "task.subtasks[0].goal_item" in str(err.value)

    def test_cyclic_precedence_path(self):
        ws = free_workspace([(0.6, 1.5), (1.4, 1.5)])
        task = simple_task(ws)
        obj = scenario_to_obj(ScenarioDocument(workspace=ws, task=task))
        obj["task"]["precedence"] = [["tg0", "tg1"], ["tg1", "tg0"]]
        with pytest.raises(ValidationError) as err:
            load_scenario(json.dumps(obj).encode())
        assert "task.precedence" in str(err.value)
        assert "cycle" in str(err.value)

    def test_invalid_workspace_geometry(self):
        obj = scenario_to_obj(minimal_doc())
        obj["workspace"]["items"][0]["pos"] = [5.0, 5.0]
        with pytest.raises(ValidationError) as err:
            load_scenario(json.dumps(obj).encode())
        assert "workspace" in str(err.value)

    def test_missing_key_names_path(self):
        obj = scenario_to_obj(minimal_doc())
        del obj["workspace"]["start"]
        with pytest.raises(ValidationError) as err:
            load_scenario(json.dumps(obj).encode())
        assert "workspace" in str(err.value)
        assert "start" in str(err.value)

    def test_bad_checkpoints_rejected(self):
        obj = scenario_to_obj(minimal_doc())
        obj["legibility"]["checkpoints"] = [0.5, 0.25]
        with pytest.raises(ValidationError):
            load_scenario(json.dumps(obj).encode())

    def test_every_validation_error_carries_path(self):
        bad_docs = []
        base = scenario_to_obj(minimal_doc())
        import copy

        d = copy.deepcopy(base)
        d["workspace"]["items"][0]["radius"] = -1
        bad_docs.append(d)
        d = copy.deepcopy(base)
        d["task"]["subtasks"][0]["agent"] = "alien"
        bad_docs.append(d)
        d = copy.deepcopy(base)
        d["workspace"]["virtual_obstacles"] = [{"vertices": [[0, 0], [1, 1]]}]
        bad_docs.append(d)
        for d in bad_docs:
            with pytest.raises(ValidationError) as err:
                load_scenario(json.dumps(d).encode())
            assert err.value.path


class TestArchiveFormat:
    def _archive(self):
        desc = MeasureDescriptor()
        archive = Archive(desc)
        ws = free_workspace([(0.6, 1.5), (1.4, 1.5)])
        archive.cells[(3, 42)] = ArchiveCell(ws, -2.5, (0.8, 42))
        archive.cells[(1, 7)] = ArchiveCell(ws, -1.25, (0.3, 7))
        archive.cells[(1, 2)] = ArchiveCell(ws, 0.5, (0.2, 2))
        return archive

    def test_cells_keyed_i_j(self):
        data = save_archive(self._archive())
        obj = json.loads(data)
        assert set(obj["cells"]) == {"3,42", "1,7", "1,2"}
        # user-facing score is higher-is-better legibility
        assert obj["cells"]["3,42"]["score"] == 2.5

    def test_round_trip(self):
        archive = self._archive()
        loaded = load_archive(save_archive(archive))
        assert set(loaded.cells) == set(archive.cells)
        for key in archive.cells:
            assert loaded.cells[key].score == pytest.approx(
                archive.cells[key].score, abs=1e-9
            )
        assert save_archive(loaded) == save_archive(archive)

    def test_csv_summary(self):
        csv = archive_csv(self._archive())
        lines = csv.strip().split("\n")
        assert lines[0] == "min_distance_bin,ordering_bin,score"
        assert len(lines) == 4
        assert lines[1].startswith("1,2,")


class TestCanonicalFloats:
    def test_nine_significant_digits(self):
        ws = free_workspace([(1.0 / 3.0, 1.5)])
        doc = ScenarioDocument(workspace=ws, task=simple_task(ws))
        data = save_scenario(doc)
        assert b"0.333333333" in data

    def test_non_finite_rejected(self):
        from legiworks.io import canonical_json_bytes

        with pytest.raises(ValueError):
            canonical_json_bytes({"x": float("nan")})
