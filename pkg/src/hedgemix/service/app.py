"""HTTP control surface for a live run.

Endpoints: /status, /inject, /retire, /pause, /resume, /step and the
/events SSE stream.  Injection specs are validated synchronously (field
errors come back before anything is queued); accepted commands apply at
the next step boundary.
"""

from __future__ import annotations

import asyncio
import json

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse

from ..predicates.base import PredicateParamError, PredicateSpec, UnknownConstructorError
from .controller import PoolFullError, RunController, UnknownModelError
from .models import (
    ControlResponse,
    InjectRequest,
    InjectResponse,
    RetireRequest,
    RetireResponse,
    StatusResponse,
)

__all__ = ["create_app"]


def _validate_specs(controller: RunController, req: InjectRequest) -> list[PredicateSpec]:
    registry = controller.run.registry
    specs = []
    errors = []
    for i, model in enumerate(req.predicates):
        spec = PredicateSpec(model.constructor, model.params)
        try:
            registry.validate(spec)
            specs.append(spec)
        except UnknownConstructorError as err:
            errors.append({"loc": ["predicates", i, "constructor"],
                           "msg": f"unknown constructor {err.name!r}"})
        except PredicateParamError as err:
            for key, msg in sorted(err.problems.items()):
                errors.append({"loc": ["predicates", i, "params", key], "msg": msg})
    if errors:
        raise HTTPException(status_code=400, detail=errors)
    if not specs:
        raise HTTPException(status_code=400, detail=[
            {"loc": ["predicates"], "msg": "need at least one predicate spec"}])
    return specs


def create_app(controller: RunController) -> FastAPI:
    app = FastAPI(title="hedgemix control service")

    @app.get("/status", response_model=StatusResponse)
    def status():
        return controller.status()

    @app.post("/inject", response_model=InjectResponse)
    def inject(req: InjectRequest):
        specs = _validate_specs(controller, req)
        try:
            mid, applied_at = controller.enqueue_inject(specs, req.pretrain, req.drop)
        except PoolFullError as err:
            raise HTTPException(status_code=409, detail=str(err))
        except UnknownModelError as err:
            raise HTTPException(status_code=404, detail=str(err))
        return InjectResponse(specialist_id=mid, applied_at=applied_at)

    @app.post("/retire", response_model=RetireResponse)
    def retire(req: RetireRequest):
        try:
            applied_at = controller.enqueue_retire(req.specialist_id)
        except UnknownModelError as err:
            raise HTTPException(status_code=404, detail=str(err))
        return RetireResponse(specialist_id=req.specialist_id, applied_at=applied_at)

    @app.post("/pause", response_model=ControlResponse)
    def pause():
        controller.pause()
        s = controller.status()
        return ControlResponse(t=s["t"], paused=s["paused"], finished=s["finished"])

    @app.post("/resume", response_model=ControlResponse)
    def resume():
        controller.resume()
        s = controller.status()
        return ControlResponse(t=s["t"], paused=s["paused"], finished=s["finished"])

    @app.post("/step", response_model=ControlResponse)
    def step():
        controller.step_once()
        s = controller.status()
        return ControlResponse(t=s["t"], paused=s["paused"], finished=s["finished"])

    @app.get("/events")
    async def events(request: Request, since: int = 0):
        async def stream():
            cursor = since
            while True:
                batch = controller.events_since(cursor)
                for seq, payload in batch:
                    cursor = seq + 1
                    yield (f"id: {seq}\nevent: {payload['kind']}\n"
                           f"data: {json.dumps(payload, sort_keys=True)}\n\n")
                    if payload["kind"] == "done":
                        return
                if await request.is_disconnected():
                    return
                if controller.finished and not controller.events_since(cursor):
                    return
                await asyncio.sleep(0.02)

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    return app
