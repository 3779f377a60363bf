"""FastAPI application exposing the simulator over HTTP.

The service runs on the same host as the data: requests reference
config files, tensors, and output directories by server-side path, and
responses return record data inline plus the paths of files written.
"""

from __future__ import annotations

import math
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..channels import RNG_ALGORITHM, ge_from_pb_lb, simulate_ge
from ..errors import SimError
from ..harness import aggregate_records, read_accuracy, read_records
from ..harness.config import ExperimentConfig, config_from_dict, load_config
from ..harness.records import (
    RunRecord,
    aggregate_to_dict,
    write_aggregate_csv,
    write_aggregate_json,
)
from ..harness.runner import run_monte_carlo, run_single_shot
from ..tensor import load_tensor
from .schemas import (
    AggregateModel,
    AggregateRequest,
    HealthResponse,
    MonteCarloRequest,
    MonteCarloResponse,
    RecordModel,
    SingleShotRequest,
    SingleShotResponse,
    TraceGenRequest,
    TraceGenResponse,
)


def _resolve_config(source) -> ExperimentConfig:
    if source.config_path is not None:
        return load_config(source.config_path)
    return config_from_dict(source.config, base_dir=Path.cwd())


def _record_model(r: RunRecord) -> RecordModel:
    return RecordModel(
        tensor_id=r.tensor_id,
        pb=r.pb,
        lb=r.lb,
        realization=r.realization,
        method=r.method,
        mse_lost=r.mse_lost,
        mse_all=r.mse_all,
        psnr=None if math.isinf(r.psnr) else r.psnr,
        lossmap=r.lossmap,
        ms_channel=r.ms_channel,
        ms_conceal=r.ms_conceal,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="feature-transmission simulator", version=__version__)

    @app.exception_handler(SimError)
    async def _sim_error(_: Request, exc: SimError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(_: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(
            status_code=404,
            content={"error": "FileNotFoundError", "detail": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__, rng_algorithm=RNG_ALGORITHM)

    @app.post("/traces/generate", response_model=TraceGenResponse)
    async def generate_trace(req: TraceGenRequest) -> TraceGenResponse:
        loss_map = simulate_ge(req.n, ge_from_pb_lb(req.pb, req.lb), req.seed)
        tokens = "".join("1" if v else "0" for v in loss_map.lost)
        return TraceGenResponse(
            tokens=tokens, n=req.n, loss_rate=loss_map.n_lost / req.n
        )

    @app.post("/single-shot", response_model=SingleShotResponse)
    async def single_shot(req: SingleShotRequest) -> SingleShotResponse:
        cfg = _resolve_config(req)
        tensor = load_tensor(req.tensor_path)
        tensor_id = req.tensor_id or Path(req.tensor_path).stem
        outputs, records = run_single_shot(cfg, tensor, tensor_id)
        repaired = {
            method: str(cfg.out_dir / "repaired" / ("%s__%s.npy" % (tensor_id, method)))
            for method in outputs
        }
        return SingleShotResponse(
            records=[_record_model(r) for r in records],
            repaired=repaired,
            records_csv=str(cfg.out_dir / "records.csv"),
        )

    @app.post("/experiments", response_model=MonteCarloResponse)
    async def monte_carlo(req: MonteCarloRequest) -> MonteCarloResponse:
        cfg = _resolve_config(req)
        report = run_monte_carlo(cfg)
        records = read_records(cfg.out_dir / "records.csv")
        return MonteCarloResponse(
            n_records=len(records),
            records_csv=str(cfg.out_dir / "records.csv"),
            aggregate_csv=str(cfg.out_dir / "aggregate.csv"),
            aggregate_json=str(cfg.out_dir / "aggregate.json"),
            aggregate=AggregateModel.model_validate(aggregate_to_dict(report)),
        )

    @app.post("/aggregate", response_model=AggregateModel)
    async def aggregate(req: AggregateRequest) -> AggregateModel:
        records = read_records(req.records_path)
        accuracy = read_accuracy(req.accuracy_path) if req.accuracy_path else None
        report = aggregate_records(records, accuracy)
        if req.out_csv:
            write_aggregate_csv(report, req.out_csv)
        if req.out_json:
            write_aggregate_json(report, req.out_json)
        return AggregateModel.model_validate(aggregate_to_dict(report))

    return app


app = create_app()
