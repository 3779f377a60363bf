"""Run records and their aggregation.

One RunRecord is one (tensor, channel point, realization, method)
evaluation.  Records serialize to CSV with a fixed header so downstream
tooling can rely on column order.  Aggregation produces per-(method,
pb, lb) cells (mean/std over all records in the cell) plus per-(method,
pb) rows averaging the cell means unweighted over the lb grid.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import AggregationError, FormatError

RECORD_HEADER = (
    "tensor_id,pb,lb,realization,method,mse_lost,mse_all,psnr,lossmap,ms_channel,ms_conceal"
)

AGGREGATE_HEADER = (
    "level,method,pb,lb,n,mse_lost_mean,mse_lost_std,mse_all_mean,mse_all_std,"
    "psnr_mean,psnr_std,top1_mean,top5_mean"
)

_GEO_TOKEN = re.compile(r"_g([0-9a-f]{8})_t[0-9a-f]{8}\.json$")


@dataclass(frozen=True)
class RunRecord:
    """Metrics for one method on one corrupted tensor."""

    tensor_id: str
    pb: float
    lb: float
    realization: int
    method: str
    mse_lost: float
    mse_all: float
    psnr: float
    lossmap: str
    ms_channel: float = 0.0
    ms_conceal: float = 0.0

    def __post_init__(self) -> None:
        for name in ("mse_lost", "mse_all", "psnr"):
            if math.isnan(getattr(self, name)):
                raise ValueError("record metric %s is NaN" % name)
        if self.realization < 0:
            raise ValueError("realization must be >= 0")

    @property
    def sort_key(self) -> tuple:
        return (self.tensor_id, self.pb, self.lb, self.realization, self.method)


def _fmt(value: float) -> str:
    return "%.12g" % value


def _fmt_ms(value: float) -> str:
    return "%.3f" % value


def record_row(r: RunRecord) -> list[str]:
    return [
        r.tensor_id,
        _fmt(r.pb),
        _fmt(r.lb),
        str(r.realization),
        r.method,
        _fmt(r.mse_lost),
        _fmt(r.mse_all),
        _fmt(r.psnr),
        r.lossmap,
        _fmt_ms(r.ms_channel),
        _fmt_ms(r.ms_conceal),
    ]


def write_records(path: str | Path, records: Sequence[RunRecord], append: bool = False) -> None:
    """Write records as CSV; canonical order is the caller's job."""
    path = Path(path)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    mode = "a" if not fresh else "w"
    with open(path, mode, encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            writer.writerow(RECORD_HEADER.split(","))
        for r in records:
            writer.writerow(record_row(r))


def read_records(path: str | Path) -> list[RunRecord]:
    """Read a RunRecord CSV, validating the fixed header."""
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("records file %s is empty" % path) from None
        if header != RECORD_HEADER.split(","):
            raise FormatError("records file %s has header %r" % (path, ",".join(header)))
        out: list[RunRecord] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 11:
                raise FormatError("records line %d has %d fields, want 11" % (lineno, len(row)))
            try:
                out.append(
                    RunRecord(
                        tensor_id=row[0],
                        pb=float(row[1]),
                        lb=float(row[2]),
                        realization=int(row[3]),
                        method=row[4],
                        mse_lost=float(row[5]),
                        mse_all=float(row[6]),
                        psnr=float(row[7]),
                        lossmap=row[8],
                        ms_channel=float(row[9]),
                        ms_conceal=float(row[10]),
                    )
                )
            except ValueError as exc:
                raise FormatError("records line %d: %s" % (lineno, exc)) from exc
    return out


def read_accuracy(path: str | Path) -> dict[tuple, tuple[int, int]]:
    """Read a classification-accuracy CSV into a record-join lookup.

    Expected header: tensor_id,method,pb,lb,realization,top1,top5 with
    0/1 flags.  Keys match RunRecord identity fields.
    """
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("accuracy file %s is empty" % path) from None
        if header != ["tensor_id", "method", "pb", "lb", "realization", "top1", "top5"]:
            raise FormatError("accuracy file %s has header %r" % (path, ",".join(header)))
        table: dict[tuple, tuple[int, int]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise FormatError("accuracy line %d has %d fields, want 7" % (lineno, len(row)))
            try:
                key = (row[0], float(row[2]), float(row[3]), int(row[4]), row[1])
                flags = (int(row[5]), int(row[6]))
            except ValueError as exc:
                raise FormatError("accuracy line %d: %s" % (lineno, exc)) from exc
            if flags[0] not in (0, 1) or flags[1] not in (0, 1):
                raise FormatError("accuracy line %d: top1/top5 must be 0 or 1" % lineno)
            table[key] = flags
    return table


@dataclass(frozen=True)
class AggregateCell:
    """Mean/std of the metrics over every record in one grouping."""

    level: str  # "cell" or "pb"
    method: str
    pb: float
    lb: float | None
    n: int
    mse_lost_mean: float
    mse_lost_std: float
    mse_all_mean: float
    mse_all_std: float
    psnr_mean: float
    psnr_std: float
    top1_mean: float | None = None
    top5_mean: float | None = None


@dataclass(frozen=True)
class AggregateReport:
    cells: tuple[AggregateCell, ...]
    per_pb: tuple[AggregateCell, ...]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(arr))
    # spread is meaningless once an infinity enters the cell
    std = float(np.std(arr)) if np.isfinite(arr).all() else 0.0
    return mean, std


def _check_single_geometry(records: Sequence[RunRecord]) -> None:
    hashes = set()
    for r in records:
        m = _GEO_TOKEN.search(r.lossmap)
        if m:
            hashes.add(m.group(1))
    if len(hashes) > 1:
        raise AggregationError(
            "records mix %d packet geometries; aggregate them separately" % len(hashes)
        )


def aggregate_records(
    records: Sequence[RunRecord],
    accuracy: Mapping[tuple, tuple[int, int]] | None = None,
) -> AggregateReport:
    """Group records into per-(method, pb, lb) cells and per-(method, pb) rows."""
    if not records:
        raise AggregationError("no records to aggregate")
    _check_single_geometry(records)

    groups: dict[tuple[str, float, float], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.method, r.pb, r.lb), []).append(r)

    cells: list[AggregateCell] = []
    for (method, pb, lb), rs in sorted(groups.items()):
        lost_m, lost_s = _mean_std([r.mse_lost for r in rs])
        all_m, all_s = _mean_std([r.mse_all for r in rs])
        psnr_m, psnr_s = _mean_std([r.psnr for r in rs])
        top1 = top5 = None
        if accuracy is not None:
            flags = [
                accuracy[k]
                for r in rs
                if (k := (r.tensor_id, r.pb, r.lb, r.realization, r.method)) in accuracy
            ]
            if flags:
                top1 = float(np.mean([f[0] for f in flags]))
                top5 = float(np.mean([f[1] for f in flags]))
        cells.append(
            AggregateCell(
                level="cell",
                method=method,
                pb=pb,
                lb=lb,
                n=len(rs),
                mse_lost_mean=lost_m,
                mse_lost_std=lost_s,
                mse_all_mean=all_m,
                mse_all_std=all_s,
                psnr_mean=psnr_m,
                psnr_std=psnr_s,
                top1_mean=top1,
                top5_mean=top5,
            )
        )

    by_pb: dict[tuple[str, float], list[AggregateCell]] = {}
    for cell in cells:
        by_pb.setdefault((cell.method, cell.pb), []).append(cell)

    per_pb: list[AggregateCell] = []
    for (method, pb), cs in sorted(by_pb.items()):
        lost_m, lost_s = _mean_std([c.mse_lost_mean for c in cs])
        all_m, all_s = _mean_std([c.mse_all_mean for c in cs])
        psnr_m, psnr_s = _mean_std([c.psnr_mean for c in cs])
        acc1 = [c.top1_mean for c in cs if c.top1_mean is not None]
        acc5 = [c.top5_mean for c in cs if c.top5_mean is not None]
        per_pb.append(
            AggregateCell(
                level="pb",
                method=method,
                pb=pb,
                lb=None,
                n=len(cs),
                mse_lost_mean=lost_m,
                mse_lost_std=lost_s,
                mse_all_mean=all_m,
                mse_all_std=all_s,
                psnr_mean=psnr_m,
                psnr_std=psnr_s,
                top1_mean=float(np.mean(acc1)) if acc1 else None,
                top5_mean=float(np.mean(acc5)) if acc5 else None,
            )
        )

    return AggregateReport(cells=tuple(cells), per_pb=tuple(per_pb))


def _cell_row(c: AggregateCell) -> list[str]:
    return [
        c.level,
        c.method,
        _fmt(c.pb),
        "" if c.lb is None else _fmt(c.lb),
        str(c.n),
        _fmt(c.mse_lost_mean),
        _fmt(c.mse_lost_std),
        _fmt(c.mse_all_mean),
        _fmt(c.mse_all_std),
        _fmt(c.psnr_mean),
        _fmt(c.psnr_std),
        "" if c.top1_mean is None else _fmt(c.top1_mean),
        "" if c.top5_mean is None else _fmt(c.top5_mean),
    ]


def write_aggregate_csv(report: AggregateReport, path: str | Path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER.split(","))
        for cell in report.cells:
            writer.writerow(_cell_row(cell))
        for row in report.per_pb:
            writer.writerow(_cell_row(row))


def _json_value(value: float | None) -> float | str | None:
    if value is None:
        return None
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _cell_dict(c: AggregateCell) -> dict:
    return {
        "level": c.level,
        "method": c.method,
        "pb": c.pb,
        "lb": c.lb,
        "n": c.n,
        "mse_lost_mean": _json_value(c.mse_lost_mean),
        "mse_lost_std": _json_value(c.mse_lost_std),
        "mse_all_mean": _json_value(c.mse_all_mean),
        "mse_all_std": _json_value(c.mse_all_std),
        "psnr_mean": _json_value(c.psnr_mean),
        "psnr_std": _json_value(c.psnr_std),
        "top1_mean": _json_value(c.top1_mean),
        "top5_mean": _json_value(c.top5_mean),
    }


def aggregate_to_dict(report: AggregateReport) -> dict:
    return {
        "cells": [_cell_dict(c) for c in report.cells],
        "per_pb": [_cell_dict(c) for c in report.per_pb],
    }


def write_aggregate_json(report: AggregateReport, path: str | Path) -> None:
    # non-finite floats become strings so the file stays strict JSON
    with open(path, "w", encoding="ascii") as fh:
        json.dump(aggregate_to_dict(report), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def sort_records(records: Iterable[RunRecord]) -> list[RunRecord]:
    """Canonical record order: (tensor, point, realization, method)."""
    return sorted(records, key=lambda r: r.sort_key)
