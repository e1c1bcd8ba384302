import json
import shutil
from pathlib import Path

import pytest

from legiworks.cli import main
from legiworks.io import load_archive, load_scenario, save_scenario, load_template

from conftest import free_workspace, simple_task
from legiworks.io import ScenarioDocument
from dataclasses import replace


@pytest.fixture(scope="module")
def small_scenario(tmp_path_factory):
    """Tabletop template with a tiny iteration budget for CLI runs."""
    doc = load_template("tabletop")
    doc = replace(doc, qd=replace(doc.qd, total_iterations=30, init_iterations=15))
    path = tmp_path_factory.mktemp("scen") / "small.json"
    path.write_bytes(save_scenario(doc))
    return path


@pytest.fixture(scope="module")
def two_goal_scenario(tmp_path_factory):
    ws = free_workspace([(0.6, 1.5), (1.4, 1.5)])
    doc = ScenarioDocument(workspace=ws, task=simple_task(ws))
    path = tmp_path_factory.mktemp("scen2") / "pair.json"
    path.write_bytes(save_scenario(doc))
    return path


class TestScore:
    def test_single_subtask_scores_one(self, tmp_path, capsys):
        ws = free_workspace([(1.0, 1.5)])
        doc = ScenarioDocument(workspace=ws, task=simple_task(ws))
        path = tmp_path / "single.json"
        path.write_bytes(save_scenario(doc))
        assert main(["score", str(path), "--json"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["score"] == pytest.approx(1.0)

    def test_breakdown_consistency(self, two_goal_scenario, capsys):
        assert main(["score", str(two_goal_scenario), "--json"]) == 0
        out = json.loads(capsys.readouterr().out)
        mean = sum(o["total"] for o in out["orders"]) / len(out["orders"])
        assert out["score"] == pytest.approx(mean, abs=1e-9)
        for order in out["orders"]:
            assert order["total"] == pytest.approx(
                sum(s["score"] for s in order["steps"]), abs=1e-9
            )

    def test_text_output(self, two_goal_scenario, capsys):
        assert main(["score", str(two_goal_scenario)]) == 0
        text = capsys.readouterr().out
        assert "task legibility" in text

    def test_invalid_scenario_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert main(["score", str(bad)]) == 1


class TestOptimize:
    def test_outputs_and_manifest(self, small_scenario, tmp_path):
        out = tmp_path / "run"
        code = main(
            ["optimize", str(small_scenario), "--seed", "5", "--out", str(out)]
        )
        assert code == 0
        for name in (
            "archive.json",
            "best_scenario.json",
            "heatmap.csv",
            "heatmap.png",
            "best_workspace.png",
            "manifest.json",
        ):
            assert (out / name).exists(), name
        archive = load_archive(out / "archive.json")
        assert len(archive) >= 1
        best = load_scenario(out / "best_scenario.json")
        assert best.metadata is not None
        assert best.metadata["legibility_score"] == pytest.approx(
            archive.best().legibility, abs=1e-6
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 5
        csv = (out / "heatmap.csv").read_text()
        assert csv.startswith("min_distance_bin,ordering_bin,score")

    def test_single_iteration_single_elite(self, small_scenario, tmp_path):
        out = tmp_path / "one"
        code = main(
            [
                "optimize",
                str(small_scenario),
                "--iters",
                "1",
                "--init",
                "1",
                "--seed",
                "0",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert len(load_archive(out / "archive.json")) == 1

    def test_seed_reproducibility_byte_identical(self, small_scenario, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            assert (
                main(
                    [
                        "optimize",
                        str(small_scenario),
                        "--iters",
                        "20",
                        "--init",
                        "10",
                        "--seed",
                        "9",
                        "--out",
                        str(out),
                    ]
                )
                == 0
            )
        for name in ("archive.json", "best_scenario.json", "heatmap.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_manifest_replay(self, small_scenario, tmp_path):
        out1, out2 = tmp_path / "orig", tmp_path / "replay"
        assert (
            main(
                [
                    "optimize",
                    str(small_scenario),
                    "--iters",
                    "20",
                    "--init",
                    "10",
                    "--seed",
                    "3",
                    "--out",
                    str(out1),
                ]
            )
            == 0
        )
        assert (
            main(
                [
                    "optimize",
                    str(small_scenario),
                    "--replay",
                    str(out1 / "manifest.json"),
                    "--out",
                    str(out2),
                ]
            )
            == 0
        )
        assert (out1 / "archive.json").read_bytes() == (
            out2 / "archive.json"
        ).read_bytes()


class TestSimulate:
    def test_identical_conditions(self, two_goal_scenario, tmp_path, capsys):
        out = tmp_path / "sim"
        code = main(
            [
                "simulate",
                str(two_goal_scenario),
                str(two_goal_scenario),
                "--seeds",
                "2",
                "--json",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        for metric in report["metrics"]:
            assert metric["wins"] == 0 and metric["losses"] == 0
        assert (out / "comparison.json").exists()
        assert (out / "comparison.txt").exists()
        assert (out / "comparison.png").exists()


class TestArchiveInspect:
    def test_inspect_lists_elites(self, small_scenario, tmp_path, capsys):
        out = tmp_path / "run"
        main(
            [
                "optimize",
                str(small_scenario),
                "--iters",
                "10",
                "--init",
                "5",
                "--seed",
                "1",
                "--out",
                str(out),
            ]
        )
        capsys.readouterr()
        assert main(["archive", "inspect", str(out / "archive.json")]) == 0
        text = capsys.readouterr().out
        assert "legibility" in text
        assert "elites total" in text
