"""FastAPI front end over the solver handlers.

Run with ``uvicorn blockalm.service.app:app``. Instance documents are sent
inline; anything the model layer rejects comes back as a 400 with the
validation message.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..model import EnumerationCapError, InfeasibleError, InstanceError
from . import handlers
from .schemas import (
    BruteRequest,
    BruteResponse,
    CheckRequest,
    CheckResponse,
    GenerateRandomRequest,
    GenerateResponse,
    GenerateTtpRequest,
    SolveRequest,
    SolveResponse,
)

app = FastAPI(
    title="blockalm",
    description="Augmented Lagrangian solver for block-structured 0/1 programs",
    version="0.1.0",
)


def _run(fn, request):
    try:
        return fn(request)
    except InstanceError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except (ValueError, EnumerationCapError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except InfeasibleError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/solve", response_model=SolveResponse)
def solve(request: SolveRequest) -> SolveResponse:
    return _run(handlers.solve_handler, request)


@app.post("/brute", response_model=BruteResponse)
def brute(request: BruteRequest) -> BruteResponse:
    return _run(handlers.brute_handler, request)


@app.post("/check", response_model=CheckResponse)
def check(request: CheckRequest) -> CheckResponse:
    return _run(handlers.check_handler, request)


@app.post("/generate/ttp", response_model=GenerateResponse)
def generate_ttp(request: GenerateTtpRequest) -> GenerateResponse:
    return _run(handlers.generate_ttp_handler, request)


@app.post("/generate/random", response_model=GenerateResponse)
def generate_random(request: GenerateRandomRequest) -> GenerateResponse:
    return _run(handlers.generate_random_handler, request)
