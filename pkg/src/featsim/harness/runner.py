"""Experiment orchestration: single-shot runs and Monte Carlo campaigns.

The pipeline per tensor is load -> quantize -> packetize -> channel ->
conceal -> metrics.  Loss maps are generated once per (channel point,
realization), cached to disk, and replayed for every method so all
methods see identical corruptions.  Every output is deterministic given
(config, seed) except the optional wall-time columns.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..channels import (
    RNG_ALGORITHM,
    GEBatch,
    IIDBatch,
    PerfectBatch,
    TraceStream,
    burst_lengths,
    ge_from_pb_lb,
    read_trace,
)
from ..conceal import ALTeCWeights, altec_train, conceal, load_weights, save_weights
from ..errors import FormatError, ParameterError, ReplayError
from ..packets import LossMap, PacketGeometry, PacketizedTensor, apply_loss, packetize
from ..tensor import (
    FeatureTensor,
    QuantParams,
    dequantize,
    load_tensor,
    quantize,
    save_tensor,
    tensor_psnr,
)
from .config import ChannelSpec, ExperimentConfig
from .records import RunRecord, aggregate_records, sort_records, write_aggregate_csv
from .records import AggregateReport, write_aggregate_json, write_records

REPAIRED_INDEX_HEADER = "tensor_id,method,pb,lb,realization,path"


# ---------------------------------------------------------------------------
# tensor sources


def load_manifest(tensors_dir: Path, manifest: Path | None) -> list[tuple[str, Path]]:
    """Resolve the tensor list: manifest rows, or sorted *.npy fallback."""
    if manifest is None:
        default = tensors_dir / "manifest.csv"
        manifest = default if default.exists() else None
    entries: list[tuple[str, Path]] = []
    if manifest is not None:
        with open(manifest, "r", encoding="ascii", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError("manifest %s is empty" % manifest) from None
            if header[:2] != ["image_id", "tensor_file"]:
                raise FormatError(
                    "manifest %s must start with columns image_id,tensor_file" % manifest
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) < 2:
                    raise FormatError("manifest line %d needs image_id,tensor_file" % lineno)
                path = Path(row[1])
                if not path.is_absolute():
                    path = tensors_dir / path
                entries.append((row[0], path))
    else:
        entries = [(p.stem, p) for p in sorted(tensors_dir.glob("*.npy"))]
    if not entries:
        raise FormatError("no tensors found under %s" % tensors_dir)
    seen = set()
    for tensor_id, _ in entries:
        if tensor_id in seen:
            raise FormatError("duplicate tensor id %r in manifest" % tensor_id)
        seen.add(tensor_id)
    return entries


@dataclass(frozen=True)
class PreparedTensor:
    """A tensor ready for corruption: quantized reference + packets."""

    tensor_id: str
    reference: FeatureTensor  # dequantize(quantize(original)): what arrives losslessly
    packets: PacketizedTensor
    qparams: QuantParams


def prepare_tensors(
    entries: Sequence[tuple[str, Path]], n_bits: int, r_p: int, order: str
) -> list[PreparedTensor]:
    prepared: list[PreparedTensor] = []
    dims: tuple[int, int, int] | None = None
    for tensor_id, path in entries:
        t = load_tensor(str(path))
        if dims is None:
            dims = t.dims
        elif t.dims != dims:
            raise ParameterError(
                "tensor %s has dims %r but the run uses %r; one geometry per run"
                % (tensor_id, t.dims, dims)
            )
        q = quantize(t, n_bits)
        reference = dequantize(q)
        prepared.append(
            PreparedTensor(
                tensor_id=tensor_id,
                reference=reference,
                packets=packetize(reference, r_p, order),
                qparams=q.params,
            )
        )
    return prepared


# ---------------------------------------------------------------------------
# channel points


@dataclass(frozen=True)
class ChannelPoint:
    """One cell of the channel grid, with its record labels and cache key."""

    model: str
    pb: float
    lb: float
    key: str
    iid_p: float = 0.0
    trace_path: str = ""

    def to_meta(self) -> dict:
        meta: dict = {"model": self.model, "pb": self.pb, "lb": self.lb}
        if self.model == "iid":
            meta["p"] = self.iid_p
        if self.model == "trace":
            meta["trace"] = Path(self.trace_path).name
        return meta


def channel_points(spec: ChannelSpec) -> list[ChannelPoint]:
    if spec.model == "perfect":
        return [ChannelPoint(model="perfect", pb=0.0, lb=0.0, key="perfect")]
    if spec.model == "ge":
        return [
            ChannelPoint(model="ge", pb=pb, lb=lb, key="ge_pb%g_lb%g" % (pb, lb))
            for pb, lb in spec.points
        ]
    if spec.model == "iid":
        # lb has no meaning for memoryless loss; record it as 0
        return [
            ChannelPoint(model="iid", pb=p, lb=0.0, key="iid_p%g" % p, iid_p=p)
            for p in spec.iid_p
        ]
    points = []
    for path in spec.traces:
        stream = read_trace(str(path))
        tokens = stream.tokens
        pb = round(float(tokens.mean()), 6)
        bursts = burst_lengths(LossMap(tokens))
        lb = round(float(bursts.mean()), 6) if bursts.size else 0.0
        points.append(
            ChannelPoint(
                model="trace",
                pb=pb,
                lb=lb,
                key="trace_%s" % Path(path).stem,
                trace_path=str(path),
            )
        )
    return points


# ---------------------------------------------------------------------------
# loss-map cache


def _geometry_dict(geo: PacketGeometry) -> dict:
    return {
        "h": geo.h,
        "w": geo.w,
        "c": geo.c,
        "r_p": geo.r_p,
        "order": geo.order,
        "n_packets": geo.n_packets,
    }


def geometry_hash(geo: PacketGeometry) -> str:
    text = json.dumps(_geometry_dict(geo), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:8]


def _tensor_set_hash(tensor_ids: Sequence[str]) -> str:
    text = json.dumps(list(tensor_ids), separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:8]


def _cache_path(cache_dir: Path, seed: int, point: ChannelPoint, realization: int,
                geo: PacketGeometry, tensor_ids: Sequence[str]) -> Path:
    name = "loss_%s_r%d_s%d_g%s_t%s.json" % (
        point.key, realization, seed, geometry_hash(geo), _tensor_set_hash(tensor_ids)
    )
    return cache_dir / name


def _generate_maps(
    seed: int,
    point: ChannelPoint,
    realization: int,
    geo: PacketGeometry,
    n_tensors: int,
    trace_tokens: Mapping[str, np.ndarray],
) -> list[LossMap]:
    if point.model == "ge":
        batch = GEBatch(ge_from_pb_lb(point.pb, point.lb), seed, realization)
    elif point.model == "iid":
        batch = IIDBatch(point.iid_p, seed, realization)
    elif point.model == "perfect":
        batch = PerfectBatch()
    else:
        stream = TraceStream(trace_tokens[point.trace_path])
        # each realization replays its own disjoint segment of the trace
        stream.position = realization * n_tensors * geo.n_packets
        if stream.position > stream.tokens.size:
            stream.position = stream.tokens.size
        batch = stream
    return [batch.next_map(geo.n_packets) for _ in range(n_tensors)]


def _expected_meta(
    seed: int, point: ChannelPoint, realization: int, geo: PacketGeometry,
    tensor_ids: Sequence[str],
) -> dict:
    return {
        "algorithm": RNG_ALGORITHM,
        "channel": point.to_meta(),
        "geometry": _geometry_dict(geo),
        "realization": realization,
        "seed": seed,
        "tensor_ids": list(tensor_ids),
    }


def load_loss_maps(path: str | Path, expected: dict | None = None) -> list[LossMap]:
    """Read a loss-map cache file, verifying it against the run on request.

    Any corruption or mismatch (different seed, channel point, geometry,
    or tensor list) raises ReplayError: a cache is never silently
    regenerated or reinterpreted.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="ascii") as fh:
            payload = json.load(fh)
        maps = payload["maps"]
        meta = {k: payload[k] for k in
                ("algorithm", "channel", "geometry", "realization", "seed", "tensor_ids")}
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ReplayError("loss-map cache %s is unreadable: %s" % (path, exc)) from exc
    if expected is not None and meta != expected:
        raise ReplayError(
            "loss-map cache %s does not match this run (cached %r, expected %r)"
            % (path, meta, expected)
        )
    n_packets = meta["geometry"]["n_packets"]
    out: list[LossMap] = []
    for i, bits in enumerate(maps):
        if len(bits) != n_packets or any(b not in (0, 1) for b in bits):
            raise ReplayError("loss-map cache %s: map %d is malformed" % (path, i))
        out.append(LossMap(np.array(bits, dtype=bool)))
    if len(out) != len(meta["tensor_ids"]):
        raise ReplayError("loss-map cache %s: %d maps for %d tensors"
                          % (path, len(out), len(meta["tensor_ids"])))
    return out


def cache_loss_maps(
    cache_dir: Path,
    seed: int,
    point: ChannelPoint,
    realization: int,
    geo: PacketGeometry,
    tensor_ids: Sequence[str],
    trace_tokens: Mapping[str, np.ndarray] | None = None,
) -> Path:
    """Write the loss maps for one (point, realization) once; verify reuse."""
    path = _cache_path(cache_dir, seed, point, realization, geo, tensor_ids)
    expected = _expected_meta(seed, point, realization, geo, tensor_ids)
    if path.exists():
        load_loss_maps(path, expected)  # write-once: existing file must match
        return path
    maps = _generate_maps(seed, point, realization, geo, len(tensor_ids),
                          trace_tokens or {})
    payload = dict(expected)
    payload["maps"] = [[int(v) for v in m.lost] for m in maps]
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="ascii") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    os.replace(tmp, path)
    return path


# ---------------------------------------------------------------------------
# evaluation


def _metric_triplet(
    reference: FeatureTensor, repaired: FeatureTensor, mask: np.ndarray, qp: QuantParams
) -> tuple[float, float, float]:
    diff = reference.data.astype(np.float64) - repaired.data.astype(np.float64)
    sq = diff * diff
    mse_all = float(sq.mean())
    lost = ~mask
    mse_lost = float(sq[lost].mean()) if lost.any() else 0.0
    psnr = tensor_psnr(reference, repaired, qp.t_max - qp.t_min)
    return mse_lost, mse_all, psnr


@dataclass
class _RepairedEntry:
    tensor_id: str
    method: str
    pb: float
    lb: float
    realization: int
    path: str


def _evaluate_item(
    cfg: ExperimentConfig,
    prepared: Sequence[PreparedTensor],
    point: ChannelPoint,
    realization: int,
    weights: ALTeCWeights | None,
    trace_tokens: Mapping[str, np.ndarray],
    save_repaired: bool,
) -> tuple[list[RunRecord], list[_RepairedEntry]]:
    cache_dir = cfg.out_dir / "cache"
    geo = prepared[0].packets.geometry
    tensor_ids = [p.tensor_id for p in prepared]

    t0 = time.perf_counter()
    path = cache_loss_maps(cache_dir, cfg.seed, point, realization, geo, tensor_ids,
                           trace_tokens)
    maps = load_loss_maps(path, _expected_meta(cfg.seed, point, realization, geo, tensor_ids))
    ms_maps = (time.perf_counter() - t0) * 1000.0 / len(prepared) if cfg.timing else 0.0
    lossmap_ref = os.path.relpath(path, cfg.out_dir)

    records: list[RunRecord] = []
    repaired_entries: list[_RepairedEntry] = []
    for prep, loss_map in zip(prepared, maps):
        t1 = time.perf_counter()
        corrupted, mask = apply_loss(prep.packets, loss_map)
        ms_channel = ms_maps + ((time.perf_counter() - t1) * 1000.0 if cfg.timing else 0.0)
        for method in cfg.methods:
            t2 = time.perf_counter()
            repaired = conceal(
                method,
                corrupted,
                mask,
                loss_map,
                geo,
                completion_cfg=cfg.silrtc_cfg if method == "silrtc" else cfg.halrtc_cfg,
                altec_weights=weights,
                inpaint_params=cfg.inpaint_params,
                harmonic_tol=cfg.harmonic_tol,
                harmonic_max_iters=cfg.harmonic_max_iters,
            )
            ms_conceal = (time.perf_counter() - t2) * 1000.0 if cfg.timing else 0.0
            mse_lost, mse_all, psnr = _metric_triplet(prep.reference, repaired, mask,
                                                      prep.qparams)
            records.append(
                RunRecord(
                    tensor_id=prep.tensor_id,
                    pb=point.pb,
                    lb=point.lb,
                    realization=realization,
                    method=method,
                    mse_lost=mse_lost,
                    mse_all=mse_all,
                    psnr=psnr,
                    lossmap=lossmap_ref,
                    ms_channel=ms_channel,
                    ms_conceal=ms_conceal,
                )
            )
            if save_repaired:
                name = "%s__%s__%s_r%d.npy" % (prep.tensor_id, method, point.key, realization)
                out_path = cfg.out_dir / "repaired" / name
                save_tensor(repaired, str(out_path))
                repaired_entries.append(
                    _RepairedEntry(
                        tensor_id=prep.tensor_id,
                        method=method,
                        pb=point.pb,
                        lb=point.lb,
                        realization=realization,
                        path=os.path.relpath(out_path, cfg.out_dir),
                    )
                )
    return records, repaired_entries


def _load_trace_tokens(spec: ChannelSpec) -> dict[str, np.ndarray]:
    if spec.model != "trace":
        return {}
    return {str(p): read_trace(str(p)).tokens for p in spec.traces}


def _load_altec_weights(cfg: ExperimentConfig, geo: PacketGeometry) -> ALTeCWeights | None:
    if "altec" not in cfg.methods:
        return None
    weights = load_weights(str(cfg.altec_weights))
    if weights.signature != (geo.h, geo.w, geo.c, geo.r_p):
        raise ParameterError(
            "altec weights were trained for (h,w,c,r_p)=%r but the run uses %r"
            % (weights.signature, (geo.h, geo.w, geo.c, geo.r_p))
        )
    return weights


def _write_repaired_index(cfg: ExperimentConfig, entries: list[_RepairedEntry]) -> None:
    entries.sort(key=lambda e: (e.tensor_id, e.pb, e.lb, e.realization, e.method))
    with open(cfg.out_dir / "repaired_index.csv", "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPAIRED_INDEX_HEADER.split(","))
        for e in entries:
            writer.writerow(
                [e.tensor_id, e.method, "%.12g" % e.pb, "%.12g" % e.lb,
                 str(e.realization), e.path]
            )


def run_monte_carlo(cfg: ExperimentConfig) -> AggregateReport:
    """Run the full channel grid and write records + aggregate files.

    Outputs under cfg.out_dir: cache/ (loss maps), records.csv,
    aggregate.csv, aggregate.json, and optionally repaired/ with
    repaired_index.csv.  Record order is canonical (sorted by tensor,
    point, realization, method), so reruns are byte-identical.
    """
    if cfg.mode != "monte_carlo":
        raise ParameterError("run_monte_carlo needs mode = 'monte_carlo'")
    entries = load_manifest(cfg.tensors_dir, cfg.manifest)
    prepared = prepare_tensors(entries, cfg.n_bits, cfg.r_p, cfg.order)
    geo = prepared[0].packets.geometry
    weights = _load_altec_weights(cfg, geo)
    trace_tokens = _load_trace_tokens(cfg.channel)
    points = channel_points(cfg.channel)

    (cfg.out_dir / "cache").mkdir(parents=True, exist_ok=True)
    if cfg.save_repaired:
        (cfg.out_dir / "repaired").mkdir(parents=True, exist_ok=True)

    items = [(point, r) for point in points for r in range(cfg.realizations)]

    def work(item: tuple[ChannelPoint, int]) -> tuple[list[RunRecord], list[_RepairedEntry]]:
        point, realization = item
        return _evaluate_item(cfg, prepared, point, realization, weights, trace_tokens,
                              cfg.save_repaired)

    if cfg.workers == 1:
        results = [work(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, items))

    records = sort_records([r for recs, _ in results for r in recs])
    write_records(cfg.out_dir / "records.csv", records)
    if cfg.save_repaired:
        _write_repaired_index(cfg, [e for _, es in results for e in es])

    report = aggregate_records(records)
    write_aggregate_csv(report, cfg.out_dir / "aggregate.csv")
    write_aggregate_json(report, cfg.out_dir / "aggregate.json")
    return report


def run_single_shot(
    cfg: ExperimentConfig, tensor: FeatureTensor, tensor_id: str = "tensor"
) -> tuple[dict[str, FeatureTensor], list[RunRecord]]:
    """One tensor, the first channel point, realization 0, all methods.

    Repaired tensors are written under out_dir/repaired and records are
    appended to out_dir/records.csv.  Returns the repaired tensor per
    method and the new records.
    """
    q = quantize(tensor, cfg.n_bits)
    reference = dequantize(q)
    prep = PreparedTensor(
        tensor_id=tensor_id,
        reference=reference,
        packets=packetize(reference, cfg.r_p, cfg.order),
        qparams=q.params,
    )
    geo = prep.packets.geometry
    weights = _load_altec_weights(cfg, geo)
    trace_tokens = _load_trace_tokens(cfg.channel)
    point = channel_points(cfg.channel)[0]

    cache_dir = cfg.out_dir / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "repaired").mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    path = cache_loss_maps(cache_dir, cfg.seed, point, 0, geo, [tensor_id], trace_tokens)
    maps = load_loss_maps(path, _expected_meta(cfg.seed, point, 0, geo, [tensor_id]))
    corrupted, mask = apply_loss(prep.packets, maps[0])
    ms_channel = (time.perf_counter() - t0) * 1000.0 if cfg.timing else 0.0
    lossmap_ref = os.path.relpath(path, cfg.out_dir)

    outputs: dict[str, FeatureTensor] = {}
    records: list[RunRecord] = []
    for method in cfg.methods:
        t1 = time.perf_counter()
        repaired = conceal(
            method,
            corrupted,
            mask,
            maps[0],
            geo,
            completion_cfg=cfg.silrtc_cfg if method == "silrtc" else cfg.halrtc_cfg,
            altec_weights=weights,
            inpaint_params=cfg.inpaint_params,
            harmonic_tol=cfg.harmonic_tol,
            harmonic_max_iters=cfg.harmonic_max_iters,
        )
        ms_conceal = (time.perf_counter() - t1) * 1000.0 if cfg.timing else 0.0
        outputs[method] = repaired
        save_tensor(repaired, str(cfg.out_dir / "repaired" / ("%s__%s.npy" % (tensor_id, method))))
        mse_lost, mse_all, psnr = _metric_triplet(prep.reference, repaired, mask, prep.qparams)
        records.append(
            RunRecord(
                tensor_id=tensor_id,
                pb=point.pb,
                lb=point.lb,
                realization=0,
                method=method,
                mse_lost=mse_lost,
                mse_all=mse_all,
                psnr=psnr,
                lossmap=lossmap_ref,
                ms_channel=ms_channel,
                ms_conceal=ms_conceal,
            )
        )

    write_records(cfg.out_dir / "records.csv", sort_records(records), append=True)
    return outputs, records


def train_altec_weights(
    tensors_dir: Path, manifest: Path | None, r_p: int, out_path: Path
) -> ALTeCWeights:
    """Train concealment weights from a directory of clean tensors."""
    entries = load_manifest(tensors_dir, manifest)
    corpus = [load_tensor(str(path)) for _, path in entries]
    weights = altec_train(corpus, r_p)
    save_weights(weights, str(out_path))
    return weights
