"""HTTP surface: POST /score per the wire protocol, GET /health.

Error mapping: 400 for schema violations, 422 for unsupported or undecodable
media, 503 when the model failed to load. Error bodies are {"error": str}.
"""

from __future__ import annotations

import argparse
import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import AdapterConfig
from .engine import MediaError, SchemaError, ScoringEngine, parse_request


def create_app(cfg: AdapterConfig) -> FastAPI:
    app = FastAPI(title="teacher-forcing scorer", docs_url=None, redoc_url=None)

    engine: "ScoringEngine | None" = None
    load_error = ""
    try:
        engine = ScoringEngine(cfg)
    except Exception as exc:  # surfaced as 503 on every request
        load_error = f"model load failed: {exc}"

    @app.get("/health")
    def health() -> JSONResponse:
        if engine is None:
            return JSONResponse({"error": load_error}, status_code=503)
        return JSONResponse({
            "status": "ok",
            "model": engine.model_id,
            "tokenizer_id": engine.tokenizer.tokenizer_id,
        })

    @app.post("/score")
    async def score(request: Request) -> JSONResponse:
        if engine is None:
            return JSONResponse({"error": load_error}, status_code=503)
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            return JSONResponse({"error": f"invalid JSON: {exc}"},
                                status_code=400)
        try:
            wire = parse_request(doc, cfg.default_top_k)
            reply = engine.score(wire)
        except MediaError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        except SchemaError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        except Exception as exc:
            return JSONResponse({"error": f"scoring failed: {exc}"},
                                status_code=503)
        return JSONResponse(reply)

    return app


def cli() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", required=True, help="model directory or id")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8890)
    parser.add_argument("--top-k", type=int, default=500)
    parser.add_argument("--tokenizer", default="auto", choices=["auto", "byte"])
    parser.add_argument("--image-policy", default="both",
                        choices=["path", "base64", "both", "reject"])
    parser.add_argument("--media-root", default=".")
    args = parser.parse_args()

    import uvicorn

    cfg = AdapterConfig(model_path=args.model, device=args.device,
                        default_top_k=args.top_k, tokenizer=args.tokenizer,
                        image_policy=args.image_policy,
                        media_root=args.media_root)
    uvicorn.run(create_app(cfg), host=args.host, port=args.port)


if __name__ == "__main__":
    cli()
