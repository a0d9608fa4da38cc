"""Live HTTP adapter: JSON over POST against the five model endpoints.

Transport failures and 5xx responses are retried with exponential backoff;
an unparseable selector answer re-queries the model. Classification of the
final outcome never depends on how many retries it took.
"""

import base64
import math
import threading
import time

import requests

from ..errors import BackendError, BackendTimeout, UnparseableResponse
from .base import Backends, SelectorRequest, SelectorResponse, VisualClue, parse_selector_text


class HttpBackend:
    """All five roles against one service root (``{base_url}/v1/...``)."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_base: float = 0.25,
        parallel_limit: int = 8,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.max_attempts = max(1, max_attempts)
        self.backoff_base = backoff_base
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(parallel_limit)
        self._embed_dim: int | None = None

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    resp = self._session.post(
                        f"{self.base_url}{path}", json=payload, timeout=self.timeout
                    )
            except requests.Timeout as exc:
                last_error = BackendTimeout(f"POST {path} timed out after {self.timeout}s")
                last_error.__cause__ = exc
                continue
            except requests.RequestException as exc:
                last_error = BackendError(f"POST {path}: {exc}")
                last_error.__cause__ = exc
                continue
            if resp.status_code >= 500:
                last_error = BackendError(resp.text[:200], status=resp.status_code)
                continue
            if resp.status_code >= 400:
                raise BackendError(resp.text[:200], status=resp.status_code)
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendError(f"POST {path}: response is not JSON") from exc
        assert last_error is not None
        raise last_error

    def select_entity(self, req: SelectorRequest) -> SelectorResponse:
        payload = {
            "instruction": req.instruction,
            "mention": req.mention,
            "context": req.context,
            "clues": [{"kind": c.kind, "text": c.text} for c in req.visual_clues],
            "candidates": [{"name": n, "description": d} for n, d in req.candidates],
            "temperature": req.temperature,
        }
        names = [name for name, _ in req.candidates]
        raw = ""
        for _ in range(self.max_attempts):
            raw = str(self._post("/v1/select", payload).get("text", ""))
            try:
                return SelectorResponse(choice=parse_selector_text(raw, names), raw_text=raw)
            except UnparseableResponse:
                continue  # fresh sample may parse
        raise UnparseableResponse(raw)

    def embed(self, text: str) -> tuple[float, ...]:
        body = self._post("/v1/embed", {"texts": [text]})
        try:
            vector = tuple(float(v) for v in body["vectors"][0])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed embed response: {body!r:.200}") from exc
        if not vector or not all(math.isfinite(v) for v in vector):
            raise BackendError("embed response contains no finite vector")
        if self._embed_dim is None:
            self._embed_dim = len(vector)
        elif len(vector) != self._embed_dim:
            from ..errors import DimensionMismatch

            raise DimensionMismatch(
                f"embedding dimension changed from {self._embed_dim} to {len(vector)}"
            )
        return vector

    def cross_modal_score(self, text: str, image: bytes) -> float:
        body = self._post(
            "/v1/xmodal",
            {"text": text, "image_b64": base64.b64encode(image).decode("ascii")},
        )
        try:
            score = float(body["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed xmodal response: {body!r:.200}") from exc
        if not math.isfinite(score):
            raise BackendError("xmodal score is not finite")
        return score

    def extract_visual_clue(self, image: bytes, kind: str) -> VisualClue:
        body = self._post(
            "/v1/i2t",
            {"image_b64": base64.b64encode(image).decode("ascii"), "kind": kind},
        )
        return VisualClue(kind=kind, text=str(body.get("text", "")))

    def summarize(self, text: str, max_chars: int) -> str:
        body = self._post("/v1/summarize", {"text": text, "max_chars": max_chars})
        return str(body.get("text", ""))


def http_backends(base_url: str, **kwargs) -> Backends:
    backend = HttpBackend(base_url, **kwargs)
    return Backends.single(backend, description={"backend_url": base_url})
