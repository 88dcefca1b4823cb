"""HTTP/WebSocket front for the service core.

The browser (or any scripted client) speaks envelopes over /ws; auxiliary
HTTP routes cover health, scenario metadata, media assets, questionnaire
submission and admin log retrieval.
"""

from __future__ import annotations

import asyncio
import contextlib
import socket
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect, Header, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import AlreadySubmitted, OutOfRange, UnknownToken, WozError
from .logstore import submit_questionnaire, verify_token
from .service import WozService


class BindError(WozError):
    """Requested port is not free."""


class QuestionnaireSubmission(BaseModel):
    token: str
    q1: int = Field(ge=1, le=7)
    q2: int = Field(ge=1, le=7)
    q3: int = Field(ge=1, le=7)
    q4: int = Field(ge=1, le=7)
    free_text: str = ""


def build_app(
    service: WozService,
    assets_dir: Optional[str | Path] = None,
    frontend_dir: Optional[str | Path] = None,
    tick_interval_s: Optional[float] = 1.0,
) -> FastAPI:
    """Assemble the ASGI app. ``tick_interval_s=None`` disables the background
    ticker so tests can drive time manually."""

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        ticker = None
        if tick_interval_s is not None:
            async def tick_loop():
                while True:
                    await asyncio.sleep(tick_interval_s)
                    service.tick()

            ticker = asyncio.create_task(tick_loop())
        yield
        if ticker is not None:
            ticker.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await ticker

    app = FastAPI(title="wozlab", lifespan=lifespan)
    app.state.service = service

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        cid = service.open_connection()
        wake = asyncio.Event()
        loop = asyncio.get_running_loop()
        # Pushes can originate from another connection's handler (possibly
        # another loop/thread), so the wake-up must be thread-safe.
        service.set_waker(cid, lambda: loop.call_soon_threadsafe(wake.set))

        async def sender():
            while True:
                await wake.wait()
                wake.clear()
                for text in service.poll(cid):
                    await websocket.send_text(text)

        sender_task = asyncio.create_task(sender())
        try:
            while True:
                text = await websocket.receive_text()
                service.handle_text(cid, text)
        except WebSocketDisconnect:
            pass
        finally:
            sender_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await sender_task
            service.drop_connection(cid)

    @app.get("/health")
    def health():
        return {"status": "ok", **service.stats()}

    @app.get("/scenario")
    def scenario_metadata():
        return service.scenario.metadata()

    @app.post("/questionnaire")
    def questionnaire(submission: QuestionnaireSubmission):
        try:
            session_id = submit_questionnaire(
                service.config.log_dir,
                submission.token,
                [submission.q1, submission.q2, submission.q3, submission.q4],
                submission.free_text,
            )
        except UnknownToken as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except AlreadySubmitted as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except OutOfRange as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"status": "recorded", "session": session_id}

    @app.get("/token/{token}")
    def token_lookup(token: str):
        session_id = verify_token(service.config.log_dir, token)
        if session_id is None:
            raise HTTPException(status_code=404, detail="no dialogue carries this token")
        return {"token": token, "session": session_id}

    @app.get("/logs/{session_id}")
    def get_log(session_id: str, authorization: str = Header(default="")):
        expected = service.config.admin_token
        if not expected:
            raise HTTPException(status_code=403, detail="admin routes are disabled")
        if authorization != f"Bearer {expected}":
            raise HTTPException(status_code=401, detail="bad admin token")
        path = service.session_log_path(session_id)
        if path is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return FileResponse(path, media_type="application/json")

    if assets_dir is not None and Path(assets_dir).is_dir():
        app.mount("/assets", StaticFiles(directory=str(assets_dir)), name="assets")

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    else:
        @app.get("/")
        def index():
            return JSONResponse(
                {"service": "wozlab", "ws": "/ws", "health": "/health"}
            )

    return app


def serve(
    service: WozService,
    host: str = "127.0.0.1",
    port: int = 8000,
    assets_dir: Optional[str | Path] = None,
    frontend_dir: Optional[str | Path] = None,
) -> None:
    """Run the service with uvicorn. Raises BindError when the port is taken."""
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    app = build_app(service, assets_dir=assets_dir, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
