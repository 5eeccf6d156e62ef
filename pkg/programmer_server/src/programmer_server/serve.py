"""HTTP serving of a trained programmer behind the /predict contract.

``POST /predict`` with ``{"input": str}`` returns ``{"output": str}``
(greedy decoding, deterministic); requests without ``"input"`` get 400.
``GET /healthz`` answers 200 once the model is loaded and 503 before
that; ``/predict`` is likewise 503 until then.
"""

from __future__ import annotations

import argparse
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .model import Predictor, load_artifact


def create_app(model_dir, preload: bool = True) -> FastAPI:
    app = FastAPI()
    app.state.predictor = None
    app.state.lock = threading.Lock()

    def load() -> None:
        predictor = load_artifact(model_dir)
        with app.state.lock:
            app.state.predictor = predictor

    if preload:
        load()
    else:
        threading.Thread(target=load, daemon=True).start()

    def current() -> Predictor | None:
        with app.state.lock:
            return app.state.predictor

    @app.get("/healthz")
    def healthz():
        if current() is None:
            return JSONResponse({"status": "loading"}, status_code=503)
        return JSONResponse({"status": "ok"})

    @app.post("/predict")
    async def predict(request: Request):
        predictor = current()
        if predictor is None:
            return JSONResponse({"error": "model is loading"}, status_code=503)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("input"), str):
            return JSONResponse({"error": 'missing string field "input"'}, status_code=400)
        return JSONResponse({"output": predictor.predict(body["input"])})

    return app


def main(argv=None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(description="Serve a trained programmer.")
    parser.add_argument("--model-dir", required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.model_dir), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
