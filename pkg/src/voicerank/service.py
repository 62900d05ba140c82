"""HTTP service: WAV upload in, ranked speakers plus stage timings out.

One process serves both the JSON API and (when a built bundle is
present) the browser client. Uploads are handled entirely in memory
and the bytes are dropped when the request handler returns; nothing
is ever written to disk.
"""

from __future__ import annotations

import time
import uuid
from email import policy
from email.parser import BytesParser
from pathlib import Path

from anyio import to_thread
from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import container
from .config import ServiceConfig
from .errors import (AllFramesRejected, EmptyAudio, MalformedContainer,
                     ModelsNotLoaded, TooShort, UnsupportedEncoding)
from .pipeline import IdentificationEngine

LENGTH_GUIDANCE = ("Please record at least 5 seconds of clear speech; "
                   "around 9 seconds works best.")

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>voicerank</title></head>
<body><h1>voicerank service</h1>
<p>No web bundle is installed. The API is available at
<code>POST /api/identify</code> and <code>GET /api/health</code>.</p>
</body></html>
"""


def _multipart_audio(body: bytes, content_type: str):
    """Pull the "audio" part out of a multipart body (stdlib parser)."""
    head = f"Content-Type: {content_type}\r\n\r\n".encode("latin-1")
    try:
        msg = BytesParser(policy=policy.default).parsebytes(head + body)
    except Exception:
        return None
    if not msg.is_multipart():
        return None
    for part in msg.walk():
        if part.is_multipart():
            continue
        if part.get_param("name", header="content-disposition") == "audio":
            return part.get_payload(decode=True)
    return None


def _result_doc(res) -> dict:
    utt = res.best_utterance
    return {"rank": res.rank, "speaker_id": res.speaker_id,
            "display_name": res.display_name, "score": float(res.score),
            "video_id": utt.video_id,
            "clip_start_s": round(utt.clip_start_s, 3),
            "clip_end_s": round(utt.clip_end_s, 3),
            "video_url": res.video_url}


def _error(status: int, request_id: str, code: str, message: str):
    return JSONResponse(status_code=status,
                        content={"request_id": request_id, "error": code,
                                 "message": message})


def create_app(engine: IdentificationEngine | None,
               config: ServiceConfig | None = None) -> FastAPI:
    """Build the application around an (optionally absent) engine.

    Passing engine=None produces a server in the "loading" state whose
    identify endpoint answers 503; health stays reachable throughout.
    """
    cfg = config or ServiceConfig()
    app = FastAPI(title="voicerank", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.config = cfg
    app.state.started = time.monotonic()

    @app.get("/api/health")
    def health() -> dict:
        eng = app.state.engine
        ready = eng is not None and eng.index is not None
        return {
            "status": "ok" if ready else "loading",
            "model_version": container.VERSION,
            "gallery_size": eng.index.size if ready else 0,
            "num_speakers": len(eng.gallery) if ready and eng.gallery else 0,
            "methods": sorted(cfg.methods),
            "uptime_s": round(time.monotonic() - app.state.started, 3),
        }

    @app.post("/api/identify")
    async def identify(request: Request):
        request_id = uuid.uuid4().hex
        declared = request.headers.get("content-length")
        if declared and declared.isdigit() and int(declared) > cfg.max_upload_bytes:
            return _error(413, request_id, "payload_too_large",
                          f"upload exceeds {cfg.max_upload_bytes} bytes")
        body = await request.body()
        if len(body) > cfg.max_upload_bytes:
            return _error(413, request_id, "payload_too_large",
                          f"upload exceeds {cfg.max_upload_bytes} bytes")

        content_type = request.headers.get("content-type", "")
        if content_type.lower().startswith("multipart/"):
            wav = _multipart_audio(body, content_type)
            if wav is None:
                return _error(400, request_id, "malformed_audio",
                              'multipart body lacks an "audio" part')
        else:
            wav = body
        del body

        eng = app.state.engine
        if eng is None or eng.index is None:
            return _error(503, request_id, "models_not_loaded",
                          "the server is still loading its models")
        try:
            outcome = await to_thread.run_sync(
                _identify_sync, eng, wav, cfg)
        except (MalformedContainer, UnsupportedEncoding) as exc:
            return _error(400, request_id, "malformed_audio", str(exc))
        except (TooShort, EmptyAudio) as exc:
            return _error(422, request_id, "too_short",
                          f"{exc} — {LENGTH_GUIDANCE}")
        except _DurationOutOfBounds as exc:
            return _error(422, request_id, "duration_out_of_bounds",
                          f"{exc} — {LENGTH_GUIDANCE}")
        except AllFramesRejected as exc:
            return _error(422, request_id, "no_speech_detected",
                          f"{exc} — {LENGTH_GUIDANCE}")
        except ModelsNotLoaded as exc:
            return _error(503, request_id, "models_not_loaded", str(exc))

        return {"request_id": request_id,
                "results": [_result_doc(r) for r in outcome.results],
                "timing": outcome.timing.as_dict()}

    if cfg.web_dir and Path(cfg.web_dir).is_dir():
        app.mount("/", StaticFiles(directory=cfg.web_dir, html=True),
                  name="web")
    else:
        @app.get("/", response_class=HTMLResponse)
        def root_page() -> str:
            return _PLACEHOLDER_PAGE

    return app


class _DurationOutOfBounds(Exception):
    """Decoded duration violates the configured sanity bounds."""


def _identify_sync(engine: IdentificationEngine, wav: bytes,
                   cfg: ServiceConfig):
    from .audio import decode_wav
    clip = decode_wav(wav)
    if clip.duration_s < cfg.min_duration_s:
        raise _DurationOutOfBounds(
            f"recording is {clip.duration_s:.2f}s; minimum is "
            f"{cfg.min_duration_s:.0f}s")
    if clip.duration_s > cfg.max_duration_s:
        raise _DurationOutOfBounds(
            f"recording is {clip.duration_s:.2f}s; maximum is "
            f"{cfg.max_duration_s:.0f}s")
    return engine.identify_clip(clip, k=cfg.top_k)


def build_engine(cfg: ServiceConfig) -> IdentificationEngine:
    """Load the model container (and optional gallery file) per config."""
    gallery = None
    if cfg.gallery_path:
        from .gallery import ingest_metadata
        gallery = ingest_metadata(cfg.gallery_path, apply_selection_rule=False)
    return IdentificationEngine.from_container(
        cfg.model_path, gallery=gallery, feature_config=cfg.features,
        relevance=cfg.map_relevance, score_workers=cfg.score_workers)


def serve(cfg: ServiceConfig):
    """Blocking entry point used by the CLI's serve subcommand."""
    import uvicorn
    app = create_app(build_engine(cfg), cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
