"""Experiment configuration: TOML parsing and validation.

A config file has sections [tensors], [packetization], [quantization],
[channel], [methods.<name>], and [run].  Relative paths are resolved
against the directory holding the config file.  The environment variable
``SIM_SEED`` overrides the configured master seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib  # type: ignore[no-redef]

from ..conceal import METHOD_NAMES, CompletionConfig, InpaintParams
from ..errors import FormatError, ParameterError
from ..packets import ORDERS

MODES = ("single_shot", "monte_carlo")
CHANNEL_MODELS = ("perfect", "iid", "ge", "trace")


@dataclass(frozen=True)
class ChannelSpec:
    """Which channel model to run and its parameter grid.

    ``ge`` uses ``points`` as (P_B, L_B) pairs; ``iid`` uses ``iid_p``
    loss probabilities; ``trace`` replays the files in ``traces``;
    ``perfect`` has no parameters and a single implicit point.
    """

    model: str
    points: tuple[tuple[float, float], ...] = ()
    iid_p: tuple[float, ...] = ()
    traces: tuple[Path, ...] = ()

    def __post_init__(self) -> None:
        if self.model not in CHANNEL_MODELS:
            raise ParameterError(
                "channel model %r not one of %s" % (self.model, ", ".join(CHANNEL_MODELS))
            )
        if self.model == "ge" and not self.points:
            raise ParameterError("ge channel needs at least one (pb, lb) point")
        if self.model == "iid" and not self.iid_p:
            raise ParameterError("iid channel needs at least one loss probability")
        if self.model == "trace" and not self.traces:
            raise ParameterError("trace channel needs at least one trace file")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, validated at construction."""

    tensors_dir: Path
    manifest: Path | None
    r_p: int
    order: str
    n_bits: int
    channel: ChannelSpec
    methods: tuple[str, ...]
    seed: int
    out_dir: Path
    mode: str = "monte_carlo"
    realizations: int = 20
    workers: int = 1
    timing: bool = False
    save_repaired: bool = False
    silrtc_cfg: CompletionConfig = field(default_factory=CompletionConfig)
    halrtc_cfg: CompletionConfig = field(default_factory=CompletionConfig)
    altec_weights: Path | None = None
    inpaint_params: InpaintParams = field(default_factory=InpaintParams)
    harmonic_tol: float = 1e-5
    harmonic_max_iters: int = 20000

    def __post_init__(self) -> None:
        if self.r_p < 1:
            raise ParameterError("r_p must be >= 1")
        if self.order not in ORDERS:
            raise ParameterError("order %r not one of %s" % (self.order, ", ".join(ORDERS)))
        if not 1 <= self.n_bits <= 16:
            raise ParameterError("n_bits must be in [1, 16]")
        if not self.methods:
            raise ParameterError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in METHOD_NAMES]
        if unknown:
            raise ParameterError(
                "unknown methods %s; valid: %s" % (unknown, ", ".join(METHOD_NAMES))
            )
        if len(set(self.methods)) != len(self.methods):
            raise ParameterError("methods must not repeat")
        if self.realizations < 1:
            raise ParameterError("realizations must be >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if self.mode not in MODES:
            raise ParameterError("mode %r not one of %s" % (self.mode, ", ".join(MODES)))
        if "altec" in self.methods and self.altec_weights is None:
            raise ParameterError("method altec needs [methods.altec] weights = <file>")
        if self.harmonic_tol <= 0 or self.harmonic_max_iters < 1:
            raise ParameterError("harmonic tol must be > 0 and max_iters >= 1")


def _require(table: Mapping[str, Any], section: str, key: str) -> Any:
    if key not in table:
        raise FormatError("config section [%s] is missing key %r" % (section, key))
    return table[key]


def _reject_unknown(table: Mapping[str, Any], section: str, allowed: Sequence[str]) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise FormatError("config section [%s] has unknown keys %s" % (section, unknown))


def _as_path(value: Any, base: Path) -> Path:
    p = Path(str(value))
    return p if p.is_absolute() else base / p


def _channel_from_table(table: Mapping[str, Any], base: Path) -> ChannelSpec:
    _reject_unknown(table, "channel", ("model", "points", "pb", "lb", "p", "traces"))
    model = str(_require(table, "channel", "model"))
    if model == "ge":
        if "points" in table:
            points = tuple((float(pb), float(lb)) for pb, lb in table["points"])
        elif "pb" in table and "lb" in table:
            pbs = [float(v) for v in table["pb"]]
            lbs = [float(v) for v in table["lb"]]
            points = tuple((pb, lb) for pb in pbs for lb in lbs)
        else:
            raise FormatError("[channel] model 'ge' needs 'points' or 'pb' + 'lb'")
        return ChannelSpec(model="ge", points=points)
    if model == "iid":
        raw = _require(table, "channel", "p")
        values = raw if isinstance(raw, (list, tuple)) else [raw]
        return ChannelSpec(model="iid", iid_p=tuple(float(v) for v in values))
    if model == "trace":
        raw = _require(table, "channel", "traces")
        return ChannelSpec(model="trace", traces=tuple(_as_path(v, base) for v in raw))
    return ChannelSpec(model=model)


def _completion_from_table(table: Mapping[str, Any], section: str) -> CompletionConfig:
    _reject_unknown(
        table, section, ("iterations", "tau", "alphas", "rho", "tolerance", "weights")
    )
    kwargs: dict[str, Any] = {}
    if "iterations" in table:
        kwargs["iterations"] = int(table["iterations"])
    if "tau" in table:
        kwargs["tau"] = float(table["tau"])
    if "alphas" in table:
        kwargs["alphas"] = tuple(float(v) for v in table["alphas"])
    if "rho" in table:
        kwargs["halrtc_rho"] = float(table["rho"])
    if "tolerance" in table:
        kwargs["tolerance"] = float(table["tolerance"])
    return CompletionConfig(**kwargs)


def config_from_dict(data: Mapping[str, Any], base_dir: str | Path = ".") -> ExperimentConfig:
    """Build a validated config from a parsed (TOML-shaped) mapping."""
    base = Path(base_dir)
    _reject_unknown(
        data, "<root>", ("tensors", "packetization", "quantization", "channel", "methods", "run")
    )

    tensors = data.get("tensors", {})
    _reject_unknown(tensors, "tensors", ("dir", "manifest"))
    tensors_dir = _as_path(_require(tensors, "tensors", "dir"), base)
    manifest = _as_path(tensors["manifest"], base) if "manifest" in tensors else None

    packetization = data.get("packetization", {})
    _reject_unknown(packetization, "packetization", ("r_p", "order"))
    r_p = int(_require(packetization, "packetization", "r_p"))
    order = str(packetization.get("order", "channel-major"))

    quantization = data.get("quantization", {})
    _reject_unknown(quantization, "quantization", ("n_bits",))
    n_bits = int(quantization.get("n_bits", 8))

    channel = _channel_from_table(data.get("channel", {}), base)

    run = data.get("run", {})
    _reject_unknown(
        run,
        "run",
        (
            "methods",
            "seed",
            "out_dir",
            "mode",
            "realizations",
            "workers",
            "timing",
            "save_repaired",
        ),
    )
    methods = tuple(str(m) for m in _require(run, "run", "methods"))
    seed = int(_require(run, "run", "seed"))
    env_seed = os.environ.get("SIM_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ParameterError("SIM_SEED must be an integer, got %r" % env_seed) from exc
    out_dir = _as_path(run.get("out_dir", "out"), base)

    method_tables = data.get("methods", {})
    _reject_unknown(method_tables, "methods", METHOD_NAMES)
    silrtc_cfg = _completion_from_table(method_tables.get("silrtc", {}), "methods.silrtc")
    halrtc_cfg = _completion_from_table(method_tables.get("halrtc", {}), "methods.halrtc")

    altec_table = method_tables.get("altec", {})
    _reject_unknown(altec_table, "methods.altec", ("weights",))
    altec_weights = (
        _as_path(altec_table["weights"], base) if "weights" in altec_table else None
    )

    ns_table = method_tables.get("ns", {})
    _reject_unknown(ns_table, "methods.ns", ("dt", "sweeps", "diffusion_every", "diffusion_steps"))
    inpaint_kwargs: dict[str, Any] = {}
    if "dt" in ns_table:
        inpaint_kwargs["dt"] = float(ns_table["dt"])
    if "sweeps" in ns_table:
        inpaint_kwargs["sweeps"] = int(ns_table["sweeps"])
    if "diffusion_every" in ns_table:
        inpaint_kwargs["diffusion_every"] = int(ns_table["diffusion_every"])
    if "diffusion_steps" in ns_table:
        inpaint_kwargs["diffusion_steps"] = int(ns_table["diffusion_steps"])
    inpaint_params = InpaintParams(**inpaint_kwargs)

    harmonic_table = method_tables.get("harmonic", {})
    _reject_unknown(harmonic_table, "methods.harmonic", ("tol", "max_iters"))
    harmonic_tol = float(harmonic_table.get("tol", 1e-5))
    harmonic_max_iters = int(harmonic_table.get("max_iters", 20000))

    return ExperimentConfig(
        tensors_dir=tensors_dir,
        manifest=manifest,
        r_p=r_p,
        order=order,
        n_bits=n_bits,
        channel=channel,
        methods=methods,
        seed=seed,
        out_dir=out_dir,
        mode=str(run.get("mode", "monte_carlo")),
        realizations=int(run.get("realizations", 20)),
        workers=int(run.get("workers", 1)),
        timing=bool(run.get("timing", False)),
        save_repaired=bool(run.get("save_repaired", False)),
        silrtc_cfg=silrtc_cfg,
        halrtc_cfg=halrtc_cfg,
        altec_weights=altec_weights,
        inpaint_params=inpaint_params,
        harmonic_tol=harmonic_tol,
        harmonic_max_iters=harmonic_max_iters,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise FormatError("config %s is not valid TOML: %s" % (path, exc)) from exc
    return config_from_dict(data, base_dir=path.parent)
