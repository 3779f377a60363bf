"""Loss concealment methods and the name-based dispatcher.

Six methods share one calling convention: the zero-filled tensor from
apply_loss plus the element mask and packet-level context.  ``none`` is
the zero-fill baseline; ``silrtc``/``halrtc`` are low-rank completions;
``caltec`` and ``altec`` exploit inter-channel structure at packet
granularity; ``ns`` and ``harmonic`` treat channels as images to inpaint.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError, ShapeError
from ..packets import LossMap, PacketGeometry
from ..tensor import FeatureTensor
from .altec import (
    ALTeCWeights,
    altec_apply,
    altec_train,
    load_weights,
    save_weights,
)
from .caltec import caltec
from .inpaint import InpaintParams, inpaint_harmonic, inpaint_ns
from .lowrank import CompletionConfig, fold, halrtc, silrtc, svt, unfold

METHOD_NAMES = ("none", "silrtc", "halrtc", "altec", "caltec", "ns", "harmonic")


def conceal_none(t: FeatureTensor, mask: np.ndarray) -> FeatureTensor:
    """Zero-fill baseline: lost elements stay zero."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != t.dims:
        raise ShapeError("mask shape %r != tensor dims %r" % (mask.shape, t.dims))
    return FeatureTensor(t.data.copy(), dict(t.meta))


def conceal(
    method: str,
    t: FeatureTensor,
    mask: np.ndarray,
    packet_map: LossMap,
    geo: PacketGeometry,
    completion_cfg: CompletionConfig | None = None,
    altec_weights: ALTeCWeights | None = None,
    inpaint_params: InpaintParams | None = None,
    harmonic_tol: float = 1e-5,
    harmonic_max_iters: int = 20000,
) -> FeatureTensor:
    """Run one concealment method on one corrupted tensor."""
    if method == "none":
        return conceal_none(t, mask)
    if method == "silrtc":
        return silrtc(t, mask, completion_cfg)
    if method == "halrtc":
        return halrtc(t, mask, completion_cfg)
    if method == "caltec":
        return caltec(t, packet_map, geo)
    if method == "altec":
        if altec_weights is None:
            raise ParameterError("altec needs trained weights")
        return altec_apply(t, packet_map, altec_weights)
    if method == "ns":
        return inpaint_ns(t, mask, inpaint_params)
    if method == "harmonic":
        return inpaint_harmonic(t, mask, tol=harmonic_tol, max_iters=harmonic_max_iters)
    raise ParameterError(
        "unknown method %r, expected one of %s" % (method, ", ".join(METHOD_NAMES))
    )


__all__ = [
    "ALTeCWeights",
    "CompletionConfig",
    "InpaintParams",
    "METHOD_NAMES",
    "altec_apply",
    "altec_train",
    "caltec",
    "conceal",
    "conceal_none",
    "fold",
    "halrtc",
    "inpaint_harmonic",
    "inpaint_ns",
    "load_weights",
    "save_weights",
    "silrtc",
    "svt",
    "unfold",
]
