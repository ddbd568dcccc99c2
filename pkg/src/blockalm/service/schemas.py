"""Request and response models for the solver service.

Exact rationals travel as strings ("p/q") or ints; every response value
also carries a float twin for plotting convenience. Instance documents are
passed through as plain JSON objects and validated by the model layer, which
stays the single source of truth for the file format.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field

NumberIn = Union[int, float, str]


class SolveOptions(BaseModel):
    mode: str = Field("classical", description="classical | classical-exact | prox")
    tau: Optional[NumberIn] = Field(None, description="prox step size; default auto")
    penalty: str = Field("geometric", description="geometric | subgradient")
    sigma: Optional[NumberIn] = Field(None, description="geometric penalty growth")
    beta: NumberIn = Field(1, description="dual step length scale")
    rho0: Optional[NumberIn] = Field(None, description="initial penalty")
    kmax: int = Field(500, ge=0)
    tmax: int = Field(100, ge=1)
    time_limit_s: Optional[float] = Field(None, gt=0)
    ref_optimum: Optional[NumberIn] = None
    gap_tolerance: float = 0.0
    seed: Optional[int] = None


class SolveRequest(BaseModel):
    instance: Dict[str, Any]
    options: SolveOptions = Field(default_factory=SolveOptions)
    include_trace: bool = True
    include_solution: bool = True


class TraceRowModel(BaseModel):
    k: int
    rho: Optional[float] = None
    lambda_norm: Optional[float] = None
    L: Optional[float] = None
    lb: Optional[float] = None
    incumbent: Optional[float] = None
    viol: Optional[float] = None
    gap1: Optional[float] = None
    gap2: Optional[float] = None
    ms: int = 0


class SolveResponse(BaseModel):
    feasible: bool
    value: Optional[str] = None
    value_float: Optional[float] = None
    lr_bound: Optional[str] = None
    lr_bound_float: Optional[float] = None
    gap1: Optional[float] = None
    gap2: Optional[float] = None
    iterations: int
    stop_reason: str
    solution: Optional[List[List[int]]] = None
    trace: Optional[List[TraceRowModel]] = None
    trace_csv: Optional[str] = None
    trace_json: Optional[str] = None


class BruteRequest(BaseModel):
    instance: Dict[str, Any]
    cap: int = Field(10**6, gt=0)


class BruteResponse(BaseModel):
    value: str
    value_float: float
    solution: List[List[int]]


class CheckRequest(BaseModel):
    instance: Dict[str, Any]
    solution: Optional[List[List[int]]] = None
    expected_value: Optional[NumberIn] = None


class BlockAssumptions(BaseModel):
    cost_support_ok: bool
    cap_subset_ok: Optional[bool] = None


class CheckResponse(BaseModel):
    valid: bool
    feasible: Optional[bool] = None
    violated_rows: List[int] = Field(default_factory=list)
    blocks_ok: Optional[List[bool]] = None
    value: Optional[str] = None
    value_matches: Optional[bool] = None
    zero_one_coupling: Optional[bool] = None
    cost_condition: Optional[bool] = None
    linearization_exact: Optional[bool] = None
    blocks: Optional[List[BlockAssumptions]] = None


class GenerateTtpRequest(BaseModel):
    spec: Dict[str, Any]


class GenerateRandomRequest(BaseModel):
    seed: int = 0
    p: int = Field(2, ge=1)
    m: int = Field(2, ge=0)
    n_j: Union[int, List[int]] = 3
    density: float = Field(0.4, ge=0.0, le=1.0)
    assumption_constrained: bool = False


class GenerateResponse(BaseModel):
    instance: Dict[str, Any]


class ErrorDetail(BaseModel):
    error: str
    kind: str = "invalid"
