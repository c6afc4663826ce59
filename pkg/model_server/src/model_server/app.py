"""FastAPI application exposing the backend wire contract.

A server process hosts any subset of capabilities, selected by the model
config; endpoints for unloaded capabilities return 404. Contract violations
(empty inputs, missing mask marker) return 400 with a JSON error body, as do
malformed request bodies. Serving is stateless across requests.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

import model_server
from model_server.engines import (
    EngineError,
    EntailmentEngine,
    MaskFillEngine,
    NerEngine,
    QaEngine,
    RelextEngine,
)

CAPABILITY_ENGINES = {
    "mask_fill": MaskFillEngine,
    "entailment": EntailmentEngine,
    "ner": NerEngine,
    "qa": QaEngine,
    "relext": RelextEngine,
}


class FillMaskRequest(BaseModel):
    prompt: str
    top_n: int = 100


class EntailRequest(BaseModel):
    premise: str
    hypothesis: str


class TextRequest(BaseModel):
    text: str


class QaRequest(BaseModel):
    question: str
    context: str


def build_engines(model_paths: dict[str, str]) -> dict[str, object]:
    unknown = set(model_paths) - set(CAPABILITY_ENGINES)
    if unknown:
        raise ValueError(f"unknown capabilities in model config: {sorted(unknown)}")
    return {
        capability: CAPABILITY_ENGINES[capability](path)
        for capability, path in model_paths.items()
    }


def create_app(engines: dict[str, object]) -> FastAPI:
    app = FastAPI(title="model-server", version=model_server.__version__)

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(EngineError)
    async def contract_violation(request: Request, exc: EngineError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def model_failure(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": f"{type(exc).__name__}: {exc}"})

    def engine(capability: str):
        loaded = engines.get(capability)
        if loaded is None:
            raise HTTPException(status_code=404, detail=f"capability {capability!r} is not loaded")
        return loaded

    @app.get("/health")
    def health():
        return {
            "version": model_server.__version__,
            "capabilities": sorted(engines),
            "models": {cap: eng.name for cap, eng in engines.items()},
        }

    @app.post("/fill-mask")
    def fill_mask(req: FillMaskRequest):
        results = engine("mask_fill").fill_mask(req.prompt, req.top_n)
        return {"results": results}

    @app.post("/entail")
    def entail(req: EntailRequest):
        return engine("entailment").entail(req.premise, req.hypothesis)

    @app.post("/ner")
    def ner(req: TextRequest):
        return {"spans": engine("ner").ner(req.text)}

    @app.post("/qa")
    def qa(req: QaRequest):
        return engine("qa").qa(req.question, req.context)

    @app.post("/relext")
    def relext(req: TextRequest):
        return {"triples": engine("relext").extract_relations(req.text)}

    return app


def create_app_from_config(model_paths: dict[str, str]) -> FastAPI:
    return create_app(build_engines(model_paths))
