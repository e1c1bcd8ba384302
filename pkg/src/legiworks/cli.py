"""Command-line entry point: optimize, score, simulate, archive inspect, serve.

Numeric settings default from the scenario file; flags override file values.
Machine output goes to stdout (or --out files); progress goes to stderr.
Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import EngineError, ParseError, ValidationError, VersionError
from .io import (
    ScenarioDocument,
    archive_csv,
    load_archive,
    load_scenario,
    save_archive,
    save_scenario,
    scenario_to_obj,
)
from .qd import Archive, LegibilityObjective, MeasureDescriptor, map_elites
from .sim import HumanModel, RobotPolicy, compare_conditions
from .task import ScoreConfig, score_task


def _score_config(doc: ScenarioDocument) -> ScoreConfig:
    return ScoreConfig(
        return_home=doc.sim.return_home,
        max_orders=doc.qd.max_orders,
        score_current_goal_only=doc.qd.score_current_goal_only,
    )


def _objective(doc: ScenarioDocument) -> LegibilityObjective:
    return LegibilityObjective(doc.task, doc.legibility, _score_config(doc))


def _write(path: Path, data) -> None:
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)


def cmd_optimize(args) -> int:
    doc = load_scenario(args.scenario)
    overrides = {}
    if args.iters is not None:
        overrides["total_iterations"] = args.iters
    if args.init is not None:
        overrides["init_iterations"] = args.init
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replay is not None:
        manifest = json.loads(Path(args.replay).read_text())
        overrides = manifest["config"]["qd_overrides"]
    doc = replace(doc, qd=replace(doc.qd, **overrides))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()

    last_report = [0.0]

    def progress(iteration: int, archive: Archive) -> None:
        now = time.monotonic()
        if now - last_report[0] >= 1.0 or iteration == doc.qd.total_iterations:
            last_report[0] = now
            best = archive.best().legibility if len(archive) else float("nan")
            print(
                f"iteration {iteration}/{doc.qd.total_iterations} "
                f"elites={len(archive)} best={best:.6f}",
                file=sys.stderr,
            )

    objective = _objective(doc)
    archive = map_elites(
        objective, MeasureDescriptor(), doc.qd, doc.workspace, progress=progress
    )
    best = archive.best()
    best_doc = replace(
        doc,
        workspace=best.workspace,
        metadata={
            "source_scenario": str(args.scenario),
            "legibility_score": best.legibility,
            "seed": doc.qd.seed,
        },
    )
    _write(out / "archive.json", save_archive(archive))
    _write(out / "best_scenario.json", save_scenario(best_doc))
    _write(out / "heatmap.csv", archive_csv(archive))
    from .report import render_heatmap, render_workspace

    render_heatmap(archive, out / "heatmap.png")
    render_workspace(
        best.workspace,
        out / "best_workspace.png",
        title=f"best elite (legibility {best.legibility:.4f})",
    )
    manifest = {
        "command": "optimize",
        "scenario": str(args.scenario),
        "config": {
            "qd_overrides": overrides,
            "resolved": scenario_to_obj(doc)["qd"],
        },
        "seed": doc.qd.seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "outputs": [
            "archive.json",
            "best_scenario.json",
            "heatmap.csv",
            "heatmap.png",
            "best_workspace.png",
        ],
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(
        f"wrote {len(archive)} elites to {out} "
        f"(best legibility {best.legibility:.6f})",
        file=sys.stderr,
    )
    return 0


def cmd_score(args) -> int:
    doc = load_scenario(args.scenario)
    breakdown = score_task(
        doc.workspace, doc.task, doc.legibility, _score_config(doc)
    )
    if args.json:
        obj = {
            "score": breakdown.total,
            "order_count": breakdown.order_count,
            "sampled": breakdown.sampled,
            "orders": [
                {
                    "order": list(o.order),
                    "total": o.total,
                    "steps": [
                        {
                            "subtask": s.subtask,
                            "agent": s.agent,
                            "eligible_goals": list(s.goals),
                            "score": s.value,
                        }
                        for s in o.steps
                    ],
                }
                for o in breakdown.orders
            ],
        }
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        print(f"task legibility: {breakdown.total:.9f}")
        print(f"valid orders: {breakdown.order_count}" + (" (sampled)" if breakdown.sampled else ""))
        for o in breakdown.orders:
            print(f"  order {' -> '.join(o.order)}: {o.total:.6f}")
            for s in o.steps:
                goals = ",".join(s.goals)
                print(f"    {s.subtask} [{s.agent}] goals={{{goals}}} score={s.value:.6f}")
    return 0


def cmd_simulate(args) -> int:
    base_doc = load_scenario(args.baseline)
    opt_doc = load_scenario(args.optimized)
    policy = RobotPolicy(confidence_threshold=base_doc.sim.confidence_threshold)
    human = HumanModel(kind="noisy" if args.noisy else "optimal")
    report = compare_conditions(
        base_doc.workspace,
        opt_doc.workspace,
        base_doc.task,
        policy,
        base_doc.legibility,
        n_seeds=args.seeds,
        human_model=human,
        return_home=base_doc.sim.return_home,
    )
    text = report.to_text()
    payload = json.dumps(report.to_json_obj(), indent=2, sort_keys=True)
    if args.json:
        print(payload)
    else:
        print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "comparison.json", payload + "\n")
        _write(out / "comparison.txt", text + "\n")
        from .report import render_comparison

        render_comparison(report, out / "comparison.png")
    return 0


def cmd_archive_inspect(args) -> int:
    archive = load_archive(args.archive)
    rows = sorted(
        archive.cells.items(), key=lambda kv: -kv[1].legibility
    )[: args.top]
    print(f"{'bin':<12}{'legibility':>14}{'min_dist':>12}{'rank':>8}")
    for key, cell in rows:
        print(
            f"{f'{key[0]},{key[1]}':<12}{cell.legibility:>14.6f}"
            f"{cell.features[0]:>12.4f}{cell.features[1]:>8}"
        )
    print(f"({len(archive)} elites total)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(Path(args.scenario_dir) if args.scenario_dir else None)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:  # uvicorn exits non-zero on bind failure
        return 2 if exc.code else 0
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="legiworks",
        description="Optimize shared workspaces for legible human motion.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the archive search on a scenario")
    p.add_argument("scenario")
    p.add_argument("--iters", type=int, default=None, help="total iterations")
    p.add_argument("--init", type=int, default=None, help="initialization iterations")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--replay", default=None, help="replay a manifest's resolved config")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("score", help="score a scenario's task legibility")
    p.add_argument("scenario")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", help="compare baseline vs optimized episodes")
    p.add_argument("baseline")
    p.add_argument("optimized")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--noisy", action="store_true", help="use the noisy human model")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("archive", help="archive utilities")
    archive_sub = p.add_subparsers(dest="archive_command", required=True)
    pi = archive_sub.add_parser("inspect", help="list elites by score")
    pi.add_argument("archive")
    pi.add_argument("--top", type=int, default=20)
    pi.set_defaults(func=cmd_archive_inspect)

    p = sub.add_parser("serve", help="serve the playground API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--scenario-dir", default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError, VersionError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
