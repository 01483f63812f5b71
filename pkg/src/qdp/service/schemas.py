"""Request/response models shared by the HTTP service and the CLI client."""

from __future__ import annotations

from pydantic import BaseModel, Field


class CountRequest(BaseModel):
    d: int = Field(ge=1, le=24)
    p: float = Field(ge=0.0, le=1.0)
    seed: int = 0
    method: str = Field(default="evensum", pattern="^(brute|evensum)$")


class CountResponse(BaseModel):
    count: str  # decimal; counts exceed 64 bits immediately
    d: int
    p: float
    seed: int
    method: str
    log2_count: float


class EstimateRequest(BaseModel):
    d: int = Field(ge=1, le=20)
    p: float = Field(ge=0.0, le=1.0)
    seed: int = 0


class EstimateResponse(BaseModel):
    report: dict
    constants: dict


class SampleRequest(BaseModel):
    d: int = Field(ge=1, le=16)
    p: float = Field(ge=0.0, le=1.0)
    seed: int = 0
    trials: int = Field(default=1, ge=1)
    emit_sets: bool = False
    threads: int | None = None


class ExperimentRequest(BaseModel):
    d: int = 12
    p: float = 0.6
    seed: int = 0
    trials: int = 1000
    side: str = Field(default="even", pattern="^(even|odd)$")
    ds: list[int] = Field(default_factory=list)
    threads: int | None = None


class ReportResponse(BaseModel):
    kind: str
    params: dict
    rows: list[dict]
    summary: dict
    passed: bool
    # denormalized JSON-lines rendering so clients can stream it byte-stably
    json_lines: str


class ThresholdsResponse(BaseModel):
    entries: dict
    count: int
    passed: bool


class ConfigResponse(BaseModel):
    d: int
    p: float
    seed: int
    config_base64: str
    n_edges: int
    retained_edges: int
