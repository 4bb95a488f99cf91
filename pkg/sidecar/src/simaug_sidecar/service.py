"""FastAPI application exposing the backend wire protocol."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from simaug_sidecar.models import SidecarError, SidecarRuntime


class GenerateRequest(BaseModel):
    id: str
    text: str
    max_new_tokens: int = Field(ge=1)
    seed: int


class EmbedRequest(BaseModel):
    texts: list[str]


class ClassifyRequest(BaseModel):
    texts: list[str]
    labels: list[str] | None = None


def create_app(runtime: SidecarRuntime) -> FastAPI:
    app = FastAPI(title="simaug sidecar", version="0.1.0")
    defaults = runtime.manifest.generation_defaults

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "models": runtime.model_ids(),
            "generation_defaults": defaults.to_dict(),
        }

    @app.post("/generate")
    def generate(request: GenerateRequest):
        try:
            generated = runtime.generator.generate(
                request.text,
                max_new_tokens=request.max_new_tokens,
                seed=request.seed,
                temperature=defaults.temperature,
                top_p=defaults.top_p,
                honor_seed=defaults.seed_policy == "per_request",
            )
        except SidecarError as exc:
            return JSONResponse(status_code=500, content={"error": str(exc)})
        return {"generated": generated}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        try:
            embeddings = runtime.embedder.embed(request.texts)
        except SidecarError as exc:
            return JSONResponse(status_code=500, content={"error": str(exc)})
        return {"embeddings": embeddings, "dim": runtime.embedder.dim}

    @app.post("/classify")
    def classify(request: ClassifyRequest):
        if runtime.classifier is None:
            return JSONResponse(
                status_code=503, content={"error": "no classifier model loaded"}
            )
        try:
            predicted, scores, order = runtime.classifier.classify(
                request.texts, request.labels
            )
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except SidecarError as exc:
            return JSONResponse(status_code=500, content={"error": str(exc)})
        return {"predicted": predicted, "scores": scores, "label_order": order}

    return app
