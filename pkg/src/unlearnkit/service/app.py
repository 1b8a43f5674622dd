"""FastAPI service exposing each pipeline stage as an endpoint."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import UnlearnkitError
from . import schemas, stages

app = FastAPI(
    title="unlearnkit",
    version=__version__,
    description="Person-level unlearning pipeline: dataset, memorization profiling, "
    "forget/retain splits, refusal augmentation, training, and evaluation.",
)


@app.exception_handler(UnlearnkitError)
async def _domain_error(_: Request, exc: UnlearnkitError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/build-dataset", response_model=schemas.BuildDatasetResponse)
def build_dataset(req: schemas.BuildDatasetRequest) -> schemas.BuildDatasetResponse:
    return stages.build_dataset(req)


@app.post("/build-model", response_model=schemas.BuildModelResponse)
def build_model(req: schemas.BuildModelRequest) -> schemas.BuildModelResponse:
    return stages.build_model(req)


@app.post("/identify", response_model=schemas.IdentifyResponse)
def identify(req: schemas.IdentifyRequest) -> schemas.IdentifyResponse:
    return stages.identify(req)


@app.post("/split", response_model=schemas.SplitResponse)
def split(req: schemas.SplitRequest) -> schemas.SplitResponse:
    return stages.split(req)


@app.post("/augment", response_model=schemas.AugmentResponse)
def augment(req: schemas.AugmentRequest) -> schemas.AugmentResponse:
    return stages.augment_stage(req)


@app.post("/unlearn", response_model=schemas.UnlearnResponse)
def unlearn(req: schemas.UnlearnRequest) -> schemas.UnlearnResponse:
    return stages.unlearn(req)


@app.post("/evaluate", response_model=schemas.EvaluateResponse)
def evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
    return stages.evaluate_stage(req)


@app.post("/report", response_model=schemas.ReportResponse)
def report(req: schemas.ReportRequest) -> schemas.ReportResponse:
    return stages.report(req)
