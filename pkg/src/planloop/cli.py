"""Command-line interface. Mirrors the HTTP endpoints against a local store."""
from __future__ import annotations

import json
import logging
import os
import sys

import click
import numpy as np

from .btree import from_xml, to_xml
from .demo import load_demonstration, save_demonstration
from .errors import PlanloopError, RepairError
from .fixtures import fixture_scene, generate_fixture
from .harness import check_trace, plan_waypoints, scene_from_json, scene_to_json, simulate, trace_summary, trace_to_csv
from .refiner import (
    RATINGS,
    HttpChatBackend,
    MockBackend,
    ReplayBackend,
    finalize,
    rate as rate_version,
    refine,
    restore,
    satisfaction_report,
    start_session,
)
from .segmentation import WindowConfig, extract_plan
from .semcodec import CodecConfig
from .service.store import SessionStore

ENV_STORE = "PLANLOOP_STORE"


def _store(store_dir: str | None) -> SessionStore:
    return SessionStore(store_dir or os.environ.get(ENV_STORE, "./planloop-store"))


def _backend(spec: str | None):
    if spec is None or spec == "live":
        return HttpChatBackend.from_env()
    kind, _, arg = spec.partition(":")
    if kind == "mock":
        return MockBackend.from_file(arg)
    if kind == "replay":
        return ReplayBackend.from_file(arg)
    raise click.BadParameter(f"backend must be live, mock:<file> or replay:<file>, got {spec!r}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool):
    """Turn recorded demonstrations into refinable robot plans."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)


@main.command()
@click.option("--demo", "demo_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--window", default=31, show_default=True, help="MI window length in frames.")
@click.option("--bins", default=8, show_default=True, help="Histogram bins per axis.")
@click.option("--d-th", default=0.15, show_default=True, help="Approach distance threshold (m).")
@click.option("--mi-tol", default=0.6, show_default=True, help="Interaction MI threshold (bits).")
@click.option("--mi-csv", type=click.Path(), default=None, help="Write frame,raw,smoothed MI CSV.")
def generate(demo_path, out_path, window, bins, d_th, mi_tol, mi_csv):
    """Segment a recording and emit the executable behavior tree."""
    demo = load_demonstration(demo_path)
    cfg = WindowConfig(window_length=window, bins=bins, mi_zero_tol=mi_tol)
    extraction = extract_plan(demo, cfg, d_th)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(to_xml(extraction.tree) + "\n")
    if mi_csv:
        series = extraction.series
        rows = np.column_stack([series.centers, series.values, series.smoothed])
        np.savetxt(mi_csv, rows, delimiter=",", header="frame,raw,smoothed", comments="", fmt="%.9g")
    click.echo(f"interaction frames {extraction.interval[0]}..{extraction.interval[1]}, "
               f"approach at {extraction.approach.frame}, "
               f"{len(extraction.minima)} MI minima -> {out_path}")


@main.command("simulate")
@click.option("--bt", "bt_path", required=True, type=click.Path(exists=True))
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--checks", "checks_path", type=click.Path(exists=True), default=None)
@click.option("--trace-csv", type=click.Path(), default=None)
@click.option("--timestep", default=0.02, show_default=True)
@click.option("--contact-surface", default=None)
def simulate_cmd(bt_path, scene_path, report_path, checks_path, trace_csv, timestep, contact_surface):
    """Run a plan kinematically against a scene and evaluate trace checks."""
    with open(bt_path, encoding="utf-8") as fh:
        tree = from_xml(fh.read())
    with open(scene_path, encoding="utf-8") as fh:
        scene = scene_from_json(json.load(fh))
    checks = []
    if checks_path:
        with open(checks_path, encoding="utf-8") as fh:
            checks = json.load(fh)
    plan = plan_waypoints(tree, scene)
    trace = simulate(plan, scene, timestep=timestep, contact_surface=contact_surface)
    report = check_trace(trace, checks)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({"summary": trace_summary(trace), "report": report.to_json()}, fh, indent=2)
    if trace_csv:
        trace_to_csv(trace, trace_csv)
    click.echo(f"{trace_summary(trace)}")
    if checks:
        click.echo("checks passed" if report.passed else "checks FAILED", err=not report.passed)
        if not report.passed:
            sys.exit(1)


@main.command()
@click.option("--kind", type=click.Choice(["pick_and_place", "zigzag_cleaning", "pouring"]), required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--scene-out", type=click.Path(), default=None, help="Also write the matching scene JSON.")
def fixture(kind, seed, out_path, scene_out):
    """Generate a synthetic demonstration recording."""
    demo, truth = generate_fixture(kind, seed=seed)
    save_demonstration(demo, out_path)
    if scene_out:
        with open(scene_out, "w", encoding="utf-8") as fh:
            json.dump(scene_to_json(fixture_scene(kind)), fh, indent=2)
    click.echo(f"{kind} seed {seed}: grasp {truth.grasp_frame}, release {truth.release_frame}, "
               f"turning points {list(truth.turning_frames)} -> {out_path}")


@main.group()
def session():
    """Create and inspect refinement sessions."""


@session.command("new")
@click.option("--demo", "demo_path", required=True, type=click.Path(exists=True))
@click.option("--store-dir", default=None)
@click.option("--d-th", default=0.15, show_default=True)
@click.option("--mi-tol", default=0.6, show_default=True)
def session_new(demo_path, store_dir, d_th, mi_tol):
    store = _store(store_dir)
    with open(demo_path, encoding="utf-8") as fh:
        demo_id = store.add_demonstration(fh.read())
    demo = store.load_demo(demo_id)
    extraction = extract_plan(demo, WindowConfig(mi_zero_tol=mi_tol), d_th)
    sess = start_session(extraction.tree, demo.models[demo.background], CodecConfig())
    record = store.create_session(demo_id, sess, config={"d_th": d_th, "mi_tol": mi_tol})
    click.echo(f"session {record.session_id}")
    click.echo(to_xml(sess.current.tree))


@session.command("show")
@click.option("--session", "session_id", required=True)
@click.option("--store-dir", default=None)
def session_show(session_id, store_dir):
    record = _store(store_dir).load(session_id)
    sess = record.session
    click.echo(f"session {session_id}  iteration {sess.iteration}")
    for row in satisfaction_report(sess):
        click.echo(f"  v{row['version']}: [{row['rating']}] {row['request']}")
    click.echo(to_xml(sess.current.tree))


@main.command("refine")
@click.option("--session", "session_id", required=True)
@click.option("--request", "request_text", required=True)
@click.option("--backend", "backend_spec", default=None, help="live | mock:<file> | replay:<file>")
@click.option("--store-dir", default=None)
def refine_cmd(session_id, request_text, backend_spec, store_dir):
    """Ask the LLM for one plan refinement."""
    store = _store(store_dir)
    record = store.load(session_id)
    try:
        version = refine(record.session, request_text, _backend(backend_spec))
    except RepairError as exc:
        click.echo(f"rejected: {exc}", err=True)
        click.echo(exc.raw_text, err=True)
        sys.exit(1)
    store.save(record)
    for line in version.repair_log:
        click.echo(f"repair: {line}")
    click.echo(to_xml(version.tree))


@main.command("restore")
@click.option("--session", "session_id", required=True)
@click.option("--store-dir", default=None)
def restore_cmd(session_id, store_dir):
    store = _store(store_dir)
    record = store.load(session_id)
    current = restore(record.session)
    store.save(record)
    click.echo(f"back to version {record.session.iteration}")
    click.echo(to_xml(current.tree))


@main.command("rate")
@click.option("--session", "session_id", required=True)
@click.option("--version", "version_index", required=True, type=int)
@click.option("--rating", required=True, type=click.Choice([r for r in RATINGS if r != "unrated"]))
@click.option("--store-dir", default=None)
def rate_cmd(session_id, version_index, rating, store_dir):
    store = _store(store_dir)
    record = store.load(session_id)
    rate_version(record.session, version_index, rating)
    store.save(record)
    click.echo("recorded")


@main.command("finalize")
@click.option("--session", "session_id", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--store-dir", default=None)
def finalize_cmd(session_id, out_path, store_dir):
    """Decode the current semantic plan into the executable tree."""
    record = _store(store_dir).load(session_id)
    exe, metadata = finalize(record.session)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(to_xml(exe) + "\n")
    click.echo(json.dumps(metadata, indent=2))


@main.command("chat")
@click.option("--session", "session_id", required=True)
@click.option("--backend", "backend_spec", default=None)
@click.option("--store-dir", default=None)
def chat(session_id, backend_spec, store_dir):
    """Interactive refinement loop. Commands: /restore, /rate N RATING, /show, /quit."""
    store = _store(store_dir)
    backend = _backend(backend_spec)
    record = store.load(session_id)
    click.echo(to_xml(record.session.current.tree))
    while True:
        try:
            line = click.prompt("request", prompt_suffix="> ").strip()
        except (EOFError, click.Abort):
            break
        if not line:
            continue
        if line in ("/quit", "/exit"):
            break
        if line == "/show":
            click.echo(to_xml(record.session.current.tree))
            continue
        if line == "/restore":
            try:
                restore(record.session)
                store.save(record)
                click.echo(f"back to version {record.session.iteration}")
            except PlanloopError as exc:
                click.echo(str(exc), err=True)
            continue
        if line.startswith("/rate"):
            try:
                _, v, r = line.split()
                rate_version(record.session, int(v), r)
                store.save(record)
                click.echo("recorded")
            except (ValueError, PlanloopError) as exc:
                click.echo(f"usage: /rate <version> <{'/'.join(RATINGS[:3])}> ({exc})", err=True)
            continue
        try:
            version = refine(record.session, line, backend)
            store.save(record)
            for entry in version.repair_log:
                click.echo(f"repair: {entry}")
            click.echo(to_xml(version.tree))
        except PlanloopError as exc:
            click.echo(f"rejected: {exc}", err=True)


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store-dir", default=None)
@click.option("--backend", "backend_spec", default=None)
def serve(port, host, store_dir, backend_spec):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    app = create_app(_store(store_dir), _backend(backend_spec))
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
