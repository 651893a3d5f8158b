"""Request handling and the two transports.

Wire format, one JSON object per request:

  {"op": "embed", "id": N, "model": M, "texts": [...]}
      -> {"id": N, "vectors": [[...], ...]}
  {"op": "score_pairs", "id": N, "model": M, "pairs": [[a, b], ...]}
      -> {"id": N, "scores": [...]}

Failures reply {"id": N, "error": "..."}; input whose id cannot be read
replies with id -1. Requests are answered strictly in arrival order, so
a reply always belongs to the oldest outstanding request.
"""

import json
import logging
import sys
from typing import Dict, Optional, Tuple

from .config import ServiceConfig
from .encoders import ModelLoadError, load_bi_model, load_cross_model

log = logging.getLogger("embed_service")

BI, CROSS = "bi", "cross"


class ModelRegistry:
    """Configured models, loaded once at startup.

    Raises ModelLoadError immediately if any slot fails to load, so a
    misconfigured service dies before accepting requests rather than on
    the first one.
    """

    def __init__(self, config: ServiceConfig):
        self._models: Dict[str, Tuple[str, object]] = {}
        for name in (config.clustering_model, config.similarity_model):
            if name not in self._models:
                model = load_bi_model(name, config.default_dim, config.device)
                self._models[name] = (BI, model)
        cross_name = config.cross_model
        if cross_name in self._models:
            raise ModelLoadError(
                f"cross_model {cross_name!r} collides with an embedding slot"
            )
        self._models[cross_name] = (
            CROSS,
            load_cross_model(cross_name, config.device),
        )

    def lookup(self, name: str) -> Optional[Tuple[str, object]]:
        return self._models.get(name)


def _read_id(obj: dict):
    rid = obj.get("id")
    # bool is an int subclass but not a valid request id
    if isinstance(rid, bool) or not isinstance(rid, int):
        return None
    return rid


def handle_request(obj, registry: ModelRegistry, max_batch: int) -> dict:
    """Map one decoded request object to its reply object."""
    if not isinstance(obj, dict):
        return {"id": -1, "error": "request must be a JSON object"}
    rid = _read_id(obj)
    if rid is None:
        return {"id": -1, "error": "missing or non-integer id"}
    op = obj.get("op")
    if op not in ("embed", "score_pairs"):
        return {"id": rid, "error": f"unknown op: {op!r}"}
    model_name = obj.get("model")
    if not isinstance(model_name, str) or not model_name:
        return {"id": rid, "error": "missing model"}
    entry = registry.lookup(model_name)
    if entry is None:
        return {"id": rid, "error": f"unknown model: {model_name!r}"}
    kind, model = entry

    if op == "embed":
        texts = obj.get("texts")
        if not isinstance(texts, list) or not all(
            isinstance(t, str) for t in texts
        ):
            return {"id": rid, "error": "texts must be a list of strings"}
        if len(texts) > max_batch:
            return {"id": rid, "error": f"batch too large (max {max_batch})"}
        if kind != BI:
            return {"id": rid, "error": f"{model_name!r} is not an embedding model"}
        try:
            vectors = model.encode(texts)
        except Exception as exc:  # inference failure must not kill the session
            log.warning("embed failed: %s", exc)
            return {"id": rid, "error": f"embed failed: {exc}"}
        return {"id": rid, "vectors": [[float(x) for x in row] for row in vectors]}

    pairs = obj.get("pairs")
    if not isinstance(pairs, list) or not all(
        isinstance(p, (list, tuple))
        and len(p) == 2
        and all(isinstance(s, str) for s in p)
        for p in pairs
    ):
        return {"id": rid, "error": "pairs must be a list of [a, b] string pairs"}
    if len(pairs) > max_batch:
        return {"id": rid, "error": f"batch too large (max {max_batch})"}
    if kind != CROSS:
        return {"id": rid, "error": f"{model_name!r} is not a pair-scoring model"}
    try:
        scores = model.predict([(a, b) for a, b in pairs])
    except Exception as exc:
        log.warning("score_pairs failed: %s", exc)
        return {"id": rid, "error": f"score_pairs failed: {exc}"}
    return {"id": rid, "scores": [float(s) for s in scores]}


def _decode_line(line: str):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        return None, f"unparsable request: {exc}"
    if not isinstance(obj, dict):
        return None, "request must be a JSON object"
    return obj, None


def stdio_loop(registry: ModelRegistry, config: ServiceConfig,
               stdin=None, stdout=None) -> None:
    """Serve line-JSON requests until stdin closes. Blank lines are skipped."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        obj, err = _decode_line(line)
        if err is not None:
            reply = {"id": -1, "error": err}
        else:
            reply = handle_request(obj, registry, config.max_batch)
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def build_http_app(registry: ModelRegistry, config: ServiceConfig):
    """FastAPI app exposing the same contract at POST /rpc."""
    try:
        from fastapi import FastAPI, Request
        from fastapi.responses import JSONResponse
    except ImportError as exc:
        raise RuntimeError(
            "http transport needs the [http] extra installed"
        ) from exc

    app = FastAPI(title="embed-service", docs_url=None, redoc_url=None)

    @app.post("/rpc")
    async def rpc(request: Request):
        try:
            obj = await request.json()
        except Exception:
            return JSONResponse({"id": -1, "error": "unparsable request body"})
        return JSONResponse(handle_request(obj, registry, config.max_batch))

    return app
