"""Pydantic request/response models for the HTTP service.

The service wraps the local experiment runner: request bodies carry
either a path to a TOML config on the server's filesystem or the same
configuration inline as a JSON object mirroring the TOML sections.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field, model_validator


class HealthResponse(BaseModel):
    status: str
    version: str
    rng_algorithm: str


class TraceGenRequest(BaseModel):
    pb: float = Field(ge=0.0, lt=1.0, description="stationary loss probability")
    lb: float = Field(ge=1.0, description="mean burst length in packets")
    n: int = Field(ge=1, le=50_000_000, description="number of packets")
    seed: int = 0


class TraceGenResponse(BaseModel):
    tokens: str  # the 0/1 sequence as a compact string
    n: int
    loss_rate: float


class ConfigSource(BaseModel):
    """Where the experiment config comes from: a server-side TOML file or
    an inline object with the same sections."""

    config_path: str | None = None
    config: dict[str, Any] | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "ConfigSource":
        if (self.config_path is None) == (self.config is None):
            raise ValueError("provide exactly one of config_path or config")
        return self


class SingleShotRequest(ConfigSource):
    tensor_path: str
    tensor_id: str | None = None


class RecordModel(BaseModel):
    tensor_id: str
    pb: float
    lb: float
    realization: int
    method: str
    mse_lost: float
    mse_all: float
    psnr: float | None  # None encodes an infinite PSNR (exact recovery)
    lossmap: str
    ms_channel: float
    ms_conceal: float


class SingleShotResponse(BaseModel):
    records: list[RecordModel]
    repaired: dict[str, str]  # method -> server-side NPY path
    records_csv: str


class MonteCarloRequest(ConfigSource):
    pass


class AggregateCellModel(BaseModel):
    level: str
    method: str
    pb: float
    lb: float | None
    n: int
    mse_lost_mean: float | str
    mse_lost_std: float | str
    mse_all_mean: float | str
    mse_all_std: float | str
    psnr_mean: float | str
    psnr_std: float | str
    top1_mean: float | str | None = None
    top5_mean: float | str | None = None


class AggregateModel(BaseModel):
    cells: list[AggregateCellModel]
    per_pb: list[AggregateCellModel]


class MonteCarloResponse(BaseModel):
    n_records: int
    records_csv: str
    aggregate_csv: str
    aggregate_json: str
    aggregate: AggregateModel


class AggregateRequest(BaseModel):
    records_path: str
    accuracy_path: str | None = None
    out_csv: str | None = None
    out_json: str | None = None


class ErrorResponse(BaseModel):
    error: str
    detail: str
