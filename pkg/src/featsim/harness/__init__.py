"""Experiment harness: config, run records, and the Monte Carlo runner."""

from .config import ChannelSpec, ExperimentConfig, load_config
from .records import (
    AGGREGATE_HEADER,
    RECORD_HEADER,
    AggregateReport,
    RunRecord,
    aggregate_records,
    read_accuracy,
    read_records,
    write_aggregate_csv,
    write_aggregate_json,
    write_records,
)
from .runner import (
    cache_loss_maps,
    load_loss_maps,
    run_monte_carlo,
    run_single_shot,
)

__all__ = [
    "AGGREGATE_HEADER",
    "AggregateReport",
    "ChannelSpec",
    "ExperimentConfig",
    "RECORD_HEADER",
    "RunRecord",
    "aggregate_records",
    "cache_loss_maps",
    "load_config",
    "load_loss_maps",
    "read_accuracy",
    "read_records",
    "run_monte_carlo",
    "run_single_shot",
    "write_aggregate_csv",
    "write_aggregate_json",
    "write_records",
]
