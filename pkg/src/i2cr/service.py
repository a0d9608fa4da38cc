"""Single-endpoint HTTP linking service.

POST /link accepts {mention, context?, image_b64?, K?, explain?} and returns
{prediction, topk?, trace?}; GET /healthz reports readiness and provenance.
Requests are isolated: shared state is the immutable snapshot and the backend
handles, so concurrent calls cannot interleave their traces.
"""

import base64
import binascii

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from .backends.base import Backends
from .config import PipelineConfig
from .errors import BackendError, BackendTimeout, I2crError, MockMiss
from .kg import KgSnapshot
from .pipeline import LinkResult, MentionSample, link, link_topk


def result_payload(result: LinkResult, include_trace: bool = False) -> dict:
    """The response shape shared verbatim by the CLI and the service."""
    payload: dict = {"prediction": result.prediction}
    if result.topk is not None:
        payload["topk"] = list(result.topk)
    if include_trace:
        payload["trace"] = result.trace.to_jsonable()
    return payload


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": detail})


def create_app(kg: KgSnapshot, backends: Backends, config: PipelineConfig) -> FastAPI:
    app = FastAPI(title="i2cr linking service", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    def healthz() -> dict:
        return {
            "status": "ok",
            "entities": len(kg),
            "kg_digest": kg.source_digest,
            "config_fingerprint": config.fingerprint(),
        }

    @app.post("/link")
    async def link_mention(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body must be a JSON object")
        if not isinstance(body, dict):
            return _bad_request("body must be a JSON object")
        mention = body.get("mention")
        if not isinstance(mention, str) or not mention:
            return _bad_request("'mention' must be a non-empty string")
        context = body.get("context", "")
        if not isinstance(context, str):
            return _bad_request("'context' must be a string")
        image = None
        if body.get("image_b64") is not None:
            if not isinstance(body["image_b64"], str):
                return _bad_request("'image_b64' must be a base64 string")
            try:
                image = base64.b64decode(body["image_b64"], validate=True)
            except (binascii.Error, ValueError):
                return _bad_request("'image_b64' is not valid base64")
        k_top = body.get("K")
        if k_top is not None and (not isinstance(k_top, int) or k_top < 1):
            return _bad_request("'K' must be a positive integer")
        explain = bool(body.get("explain", False))

        sample = MentionSample(mention=mention, context=context, image=image)
        try:
            # keep the event loop free: linking blocks on backend calls
            if k_top is None:
                result = await run_in_threadpool(link, sample, kg, backends, config)
            else:
                result = await run_in_threadpool(link_topk, sample, kg, backends, config, k_top)
        except (BackendTimeout, BackendError) as exc:
            return JSONResponse(status_code=503, content={"detail": f"backend unavailable: {exc}"})
        except MockMiss as exc:
            return JSONResponse(status_code=503, content={"detail": f"transcript gap: {exc}"})
        except I2crError as exc:
            return JSONResponse(status_code=500, content={"detail": str(exc)})
        return result_payload(result, include_trace=explain)

    return app
