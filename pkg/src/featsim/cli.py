"""Command-line interface.

Every data command runs in-process by default; passing ``--server URL``
routes the same operation through a running HTTP service instead (the
server must see the same filesystem, since configs and tensors are
passed by path).
"""

from __future__ import annotations

import math
from pathlib import Path

import click

from . import __version__
from .channels import LossMap, ge_from_pb_lb, simulate_ge, save_trace
from .errors import SimError
from .harness import (
    aggregate_records,
    load_config,
    read_accuracy,
    read_records,
    write_aggregate_csv,
    write_aggregate_json,
)
from .harness.runner import run_monte_carlo, run_single_shot, train_altec_weights
from .tensor import load_tensor

import numpy as np


def _client(server: str):
    import httpx

    return httpx.Client(base_url=server, timeout=600.0)


def _post(server: str, endpoint: str, payload: dict) -> dict:
    with _client(server) as client:
        response = client.post(endpoint, json=payload)
        if response.status_code != 200:
            try:
                body = response.json()
                message = "%s: %s" % (body.get("error", "error"), body.get("detail", ""))
            except ValueError:
                message = response.text
            raise click.ClickException("server returned %d: %s" % (response.status_code, message))
        return response.json()


def _fail_on_sim_error(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SimError as exc:
        raise click.ClickException("%s: %s" % (type(exc).__name__, exc)) from exc


@click.group()
@click.version_option(version=__version__, prog_name="sim")
def main() -> None:
    """Simulate feature-tensor transmission over lossy packet channels."""


@main.command("single-shot")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="TOML experiment config.")
@click.option("--tensor", "tensor_path", required=True, type=click.Path(exists=True),
              help="NPY feature tensor to transmit.")
@click.option("--tensor-id", default=None, help="Record id (default: file stem).")
@click.option("--server", default=None, help="Run through this service URL instead.")
def single_shot(config_path: str, tensor_path: str, tensor_id: str | None,
                server: str | None) -> None:
    """Corrupt one tensor with one channel realization and repair it."""
    tensor_id = tensor_id or Path(tensor_path).stem
    if server:
        body = _post(server, "/single-shot", {
            "config_path": str(Path(config_path).resolve()),
            "tensor_path": str(Path(tensor_path).resolve()),
            "tensor_id": tensor_id,
        })
        for rec in body["records"]:
            psnr = rec["psnr"]
            click.echo("%s: mse_lost=%.6g mse_all=%.6g psnr=%s" % (
                rec["method"], rec["mse_lost"], rec["mse_all"],
                "inf" if psnr is None else "%.4f" % psnr))
        click.echo("records appended to %s" % body["records_csv"])
        return
    cfg = _fail_on_sim_error(load_config, config_path)
    tensor = _fail_on_sim_error(load_tensor, tensor_path)
    outputs, records = _fail_on_sim_error(run_single_shot, cfg, tensor, tensor_id)
    for rec in sorted(records, key=lambda r: r.method):
        click.echo("%s: mse_lost=%.6g mse_all=%.6g psnr=%s" % (
            rec.method, rec.mse_lost, rec.mse_all,
            "inf" if math.isinf(rec.psnr) else "%.4f" % rec.psnr))
    click.echo("repaired tensors in %s" % (cfg.out_dir / "repaired"))
    click.echo("records appended to %s" % (cfg.out_dir / "records.csv"))


@main.command("mc")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="TOML experiment config.")
@click.option("--server", default=None, help="Run through this service URL instead.")
def monte_carlo(config_path: str, server: str | None) -> None:
    """Run the configured Monte Carlo campaign and aggregate it."""
    if server:
        body = _post(server, "/experiments", {"config_path": str(Path(config_path).resolve())})
        click.echo("%d records -> %s" % (body["n_records"], body["records_csv"]))
        click.echo("aggregate -> %s, %s" % (body["aggregate_csv"], body["aggregate_json"]))
        return
    cfg = _fail_on_sim_error(load_config, config_path)
    report = _fail_on_sim_error(run_monte_carlo, cfg)
    for row in report.per_pb:
        click.echo("method=%s pb=%g: mse_all=%.6g psnr=%.4f (over %d lb cells)" % (
            row.method, row.pb, row.mse_all_mean, row.psnr_mean, row.n))
    click.echo("records -> %s" % (cfg.out_dir / "records.csv"))
    click.echo("aggregate -> %s, %s" % (cfg.out_dir / "aggregate.csv",
                                        cfg.out_dir / "aggregate.json"))


@main.group("trace")
def trace() -> None:
    """Loss-trace utilities."""


@trace.command("gen")
@click.option("--pb", required=True, type=float, help="Stationary loss probability.")
@click.option("--lb", required=True, type=float, help="Mean burst length (packets).")
@click.option("--n", required=True, type=int, help="Number of packets.")
@click.option("--seed", default=0, type=int, show_default=True, help="RNG seed.")
@click.option("--out", required=True, type=click.Path(), help="Trace file to write.")
@click.option("--server", default=None, help="Generate on this service URL instead.")
def trace_gen(pb: float, lb: float, n: int, seed: int, out: str, server: str | None) -> None:
    """Generate a Gilbert-Elliott loss trace file."""
    header = "ge pb=%g lb=%g seed=%d n=%d" % (pb, lb, seed, n)
    if server:
        body = _post(server, "/traces/generate",
                     {"pb": pb, "lb": lb, "n": n, "seed": seed})
        loss_map = LossMap(np.array([c == "1" for c in body["tokens"]], dtype=bool))
    else:
        params = _fail_on_sim_error(ge_from_pb_lb, pb, lb)
        loss_map = _fail_on_sim_error(simulate_ge, n, params, seed)
    save_trace(loss_map, out, header=header)
    click.echo("wrote %d packets (%.4f lost) -> %s" % (
        loss_map.n_packets, loss_map.n_lost / loss_map.n_packets, out))


@main.command("aggregate")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True),
              help="RunRecord CSV produced by mc or single-shot.")
@click.option("--out", "out_csv", required=True, type=click.Path(),
              help="Aggregate CSV to write.")
@click.option("--json", "out_json", default=None, type=click.Path(),
              help="Also write the aggregate as JSON.")
@click.option("--accuracy", "accuracy_path", default=None, type=click.Path(exists=True),
              help="Classification-accuracy CSV to join (adds top1/top5 columns).")
@click.option("--server", default=None, help="Run through this service URL instead.")
def aggregate(records_path: str, out_csv: str, out_json: str | None,
              accuracy_path: str | None, server: str | None) -> None:
    """Aggregate records into per-(method, pb, lb) and per-(method, pb) rows."""
    if server:
        body = _post(server, "/aggregate", {
            "records_path": str(Path(records_path).resolve()),
            "accuracy_path": str(Path(accuracy_path).resolve()) if accuracy_path else None,
            "out_csv": str(Path(out_csv).resolve()),
            "out_json": str(Path(out_json).resolve()) if out_json else None,
        })
        click.echo("aggregated %d cells, %d per-pb rows -> %s" % (
            len(body["cells"]), len(body["per_pb"]), out_csv))
        return
    records = _fail_on_sim_error(read_records, records_path)
    accuracy = _fail_on_sim_error(read_accuracy, accuracy_path) if accuracy_path else None
    report = _fail_on_sim_error(aggregate_records, records, accuracy)
    write_aggregate_csv(report, out_csv)
    if out_json:
        write_aggregate_json(report, out_json)
    click.echo("aggregated %d cells, %d per-pb rows -> %s" % (
        len(report.cells), len(report.per_pb), out_csv))


@main.group("altec")
def altec() -> None:
    """Trained inter-channel concealment weights."""


@altec.command("train")
@click.option("--tensors", "tensors_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of clean NPY tensors (manifest.csv honored).")
@click.option("--manifest", default=None, type=click.Path(exists=True),
              help="Explicit manifest CSV (image_id,tensor_file,label).")
@click.option("--r-p", "r_p", required=True, type=int, help="Rows per packet.")
@click.option("--out", required=True, type=click.Path(), help="Weights JSON to write.")
def altec_train_cmd(tensors_dir: str, manifest: str | None, r_p: int, out: str) -> None:
    """Train concealment weights on clean tensors."""
    weights = _fail_on_sim_error(
        train_altec_weights, Path(tensors_dir),
        Path(manifest) if manifest else None, r_p, Path(out))
    click.echo("trained %d weights for (h,w,c,r_p)=%s -> %s" % (
        weights.weight_count, weights.signature, out))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
