"""HTTP/JSON service exposing the demonstration-to-plan loop."""
from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..btree import to_xml
from ..errors import (
    BackendError,
    DemoValidationError,
    ParseError,
    PlanloopError,
    RepairError,
    SchemaError,
    SegmentationError,
    SessionError,
    StoreCorruptError,
)
from ..harness import check_trace, plan_waypoints, scene_from_json, simulate, trace_summary
from ..refiner import RATINGS, LLMBackend, finalize, rate, refine, restore, start_session
from ..segmentation import WindowConfig, extract_plan
from ..semcodec import CodecConfig
from .store import SessionStore


class PlanRequest(BaseModel):
    demonstration_id: str
    config: dict = Field(default_factory=dict)
    d_th: float = 0.15


class RefineRequest(BaseModel):
    request: str
    wait: bool = True


class RateRequest(BaseModel):
    version: int
    rating: str


class FinalizeRequest(BaseModel):
    scene: dict | None = None


class SimulateRequest(BaseModel):
    scene: dict
    checks: list[dict] = Field(default_factory=list)
    timestep: float = 0.02
    contact_surface: str | None = None
    contact_tol: float = 0.005


def _version_meta(session) -> list[dict]:
    return [
        {"version": j, "request": v.request, "rating": v.rating, "repair_log": v.repair_log}
        for j, v in enumerate(session.versions)
    ]


def create_app(store: SessionStore, backend: LLMBackend) -> FastAPI:
    app = FastAPI(title="planloop", version="0.1.0")

    @app.exception_handler(PlanloopError)
    async def _planloop_error(request: Request, exc: PlanloopError):
        if isinstance(exc, BackendError):
            return JSONResponse(status_code=502, content={"detail": str(exc)})
        if isinstance(exc, RepairError):
            return JSONResponse(status_code=422, content={"detail": str(exc), "raw_output": exc.raw_text})
        if isinstance(exc, StoreCorruptError):
            return JSONResponse(status_code=500, content={"detail": str(exc)})
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    def _load(session_id: str):
        try:
            return store.load(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.post("/demonstrations")
    async def add_demonstration(request: Request):
        text = (await request.body()).decode("utf-8")
        try:
            demo_id = store.add_demonstration(text)
        except (ParseError, SchemaError, DemoValidationError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"demonstration_id": demo_id}

    @app.post("/plans")
    def create_plan(body: PlanRequest):
        try:
            demo = store.load_demo(body.demonstration_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown demonstration {body.demonstration_id!r}")
        cfg_fields = {k: v for k, v in body.config.items() if k != "codec"}
        cfg = WindowConfig(**cfg_fields) if cfg_fields else WindowConfig()
        codec = CodecConfig(**body.config.get("codec", {}))
        try:
            extraction = extract_plan(demo, cfg, body.d_th)
        except SegmentationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session = start_session(extraction.tree, demo.models[demo.background], codec)
        record = store.create_session(
            body.demonstration_id, session,
            config={"window": cfg.__dict__ | {"min_prominence": cfg.min_prominence}, "d_th": body.d_th},
        )
        return {"session_id": record.session_id, "sem_bt_0": to_xml(session.current.tree)}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        record = _load(session_id)
        session = record.session
        return {
            "session_id": session_id,
            "iteration": session.iteration,
            "current_xml": to_xml(session.current.tree),
            "pending": store.is_pending(session_id),
            "versions": _version_meta(session),
            "object_labels": session.object_labels,
        }

    def _run_refine(session_id: str, request_text: str):
        record = _load(session_id)
        version = refine(record.session, request_text, backend)
        store.save(record)
        return record, version

    @app.post("/sessions/{session_id}/refine")
    def refine_session(session_id: str, body: RefineRequest):
        _load(session_id)
        lock = store.lock_for(session_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a refinement is already in flight")
        if not body.wait:
            store.set_pending(session_id, True)

            def job():
                try:
                    _run_refine(session_id, body.request)
                except PlanloopError:
                    pass
                finally:
                    store.set_pending(session_id, False)
                    lock.release()

            threading.Thread(target=job, daemon=True).start()
            return JSONResponse(status_code=202, content={"pending": True})
        try:
            record, version = _run_refine(session_id, body.request)
            return {
                "version": record.session.iteration,
                "xml": to_xml(version.tree),
                "repair_log": version.repair_log,
            }
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/restore")
    def restore_session(session_id: str):
        record = _load(session_id)
        try:
            current = restore(record.session)
        except SessionError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        store.save(record)
        return {"version": record.session.iteration, "xml": to_xml(current.tree)}

    @app.post("/sessions/{session_id}/rate")
    def rate_session(session_id: str, body: RateRequest):
        record = _load(session_id)
        try:
            rate(record.session, body.version, body.rating)
        except SessionError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        store.save(record)
        return {"ok": True}

    @app.post("/sessions/{session_id}/finalize")
    def finalize_session(session_id: str, body: FinalizeRequest | None = None):
        record = _load(session_id)
        exe, metadata = finalize(record.session)
        return {"exe_xml": to_xml(exe), "metadata": metadata}

    @app.post("/sessions/{session_id}/simulate")
    def simulate_session(session_id: str, body: SimulateRequest):
        record = _load(session_id)
        exe, _ = finalize(record.session)
        scene = scene_from_json(body.scene)
        plan = plan_waypoints(exe, scene)
        trace = simulate(plan, scene, timestep=body.timestep,
                         contact_surface=body.contact_surface, contact_tol=body.contact_tol)
        report = check_trace(trace, body.checks)
        stride = max(len(trace) // 500, 1)
        return {
            "summary": trace_summary(trace),
            "report": report.to_json(),
            "trace": {
                "t": [float(v) for v in trace.times[::stride]],
                "z": [float(v) for v in trace.positions[::stride, 2]],
                "contact": [int(v) for v in trace.contact[::stride]],
                "collision": [int(v) for v in trace.collision[::stride]],
            },
        }

    return app
