"""
HTTP surfaces.

``create_service_app`` exposes workflows::

    POST /problems                   {"kind", "data_path", "profile_path", ...} -> {"correlation_id"}
    GET  /workflows/{correlation_id} state, route and message trace
    GET  /results/{correlation_id}   assignments once done

``create_backend_app`` exposes any BackendAdapter, plain text throughout::

    POST /jobs?shots=&seed=          body: hqc circuit text -> job id
    GET  /jobs/{id}/status           queued | running | done | failed
    GET  /jobs/{id}/result           "<bitstring> <count>" lines
"""
from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .backends import BackendAdapter, MockRemoteBackend, ResultNotReady, SubmissionRejected, UnknownJob
from .services import CLUSTER_ASSIGNMENT, ProblemRequest, Sinks, WorkflowConfig
from .workflow import HybridSystem


class ProblemBody(BaseModel):
    kind: str = CLUSTER_ASSIGNMENT
    data_path: str
    profile_path: str | None = None
    seed: int = 0
    shots: int | None = None
    sinks: Sinks = Sinks.APPLICATION


def create_service_app(
    config_factory: Callable[[ProblemBody], WorkflowConfig] | None = None,
    system: HybridSystem | None = None,
) -> FastAPI:
    def default_config(body: ProblemBody) -> WorkflowConfig:
        return WorkflowConfig(seed=body.seed, shots=body.shots, sinks=body.sinks)

    make_config = config_factory or default_config

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.system = system or HybridSystem()
        await app.state.system.start()
        yield
        await app.state.system.stop()

    app = FastAPI(title="hdma", lifespan=lifespan)

    def _workflow(request: Request, correlation_id: str):
        try:
            return request.app.state.system.monitor.get(correlation_id)
        except KeyError:
            raise HTTPException(404, f"unknown workflow {correlation_id}") from None

    @app.post("/problems", status_code=202)
    async def post_problem(body: ProblemBody, request: Request):
        try:
            config = make_config(body)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        problem = ProblemRequest(body.data_path, body.kind, body.profile_path)
        cid = request.app.state.system.submit(problem, config)
        return {"correlation_id": cid}

    @app.get("/workflows/{correlation_id}")
    async def get_workflow(correlation_id: str, request: Request):
        wf = _workflow(request, correlation_id)
        trace = request.app.state.system.trace.for_correlation(correlation_id)
        return {
            "correlation_id": correlation_id,
            "state": wf.state,
            "route": wf.route.value if wf.route else None,
            "error": wf.error,
            "trace": [{"timestamp": e.timestamp, "service": e.service, "kind": e.kind.value} for e in trace],
        }

    @app.get("/results/{correlation_id}")
    async def get_results(correlation_id: str, request: Request):
        wf = _workflow(request, correlation_id)
        if wf.state == "failed":
            raise HTTPException(409, f"workflow failed: {wf.error}")
        if wf.state != "done":
            raise HTTPException(409, f"workflow is {wf.state}")
        return {"assignments": {str(a.point_id): a.cluster_label for a in wf.assignments}}

    return app


def create_backend_app(adapter: BackendAdapter | None = None) -> FastAPI:
    app = FastAPI(title="hdma mock backend")
    app.state.adapter = adapter or MockRemoteBackend()

    @app.post("/jobs", response_class=PlainTextResponse, status_code=201)
    async def submit(request: Request, shots: int = 1000, seed: int | None = None):
        if shots < 1:
            raise HTTPException(400, "shots must be >= 1")
        text = (await request.body()).decode("utf-8")
        try:
            return app.state.adapter.submit_job(text, shots, seed)
        except SubmissionRejected as exc:
            raise HTTPException(503, str(exc)) from None

    @app.get("/jobs/{job_id}/status", response_class=PlainTextResponse)
    async def status(job_id: str):
        try:
            return app.state.adapter.job_status(job_id).value
        except UnknownJob:
            raise HTTPException(404, f"unknown job {job_id}") from None

    @app.get("/jobs/{job_id}/result", response_class=PlainTextResponse)
    async def result(job_id: str):
        try:
            return app.state.adapter.job_result(job_id).to_text()
        except UnknownJob:
            raise HTTPException(404, f"unknown job {job_id}") from None
        except ResultNotReady as exc:
            raise HTTPException(409, str(exc)) from None

    return app
