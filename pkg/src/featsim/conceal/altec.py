"""Pre-trained linear concealment over packet row offsets.

One linear predictor per row offset o in [0, r_p) is fit by ordinary
least squares over a training corpus.  For a target element x_c[i, j]
with i = g*r_p + o the regressors are: the channel's own row just above
the group (zeros for the first group), the row just below (zeros past the
bottom), every collocated channel value x_c'[i, j] with the self channel
constrained to zero, and an intercept.  Weights are shared across columns
and channels, so the weight count is exactly r_p * (c + 3).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, ParameterError, ShapeError
from ..packets import LossMap, PacketGeometry
from ..tensor import FeatureTensor


@dataclass
class ALTeCWeights:
    """Per-offset linear model for one (h, w, c, r_p) layer signature."""

    h: int
    w: int
    c: int
    r_p: int
    w_top: np.ndarray  # (r_p,)
    w_bot: np.ndarray  # (r_p,)
    w_ch: np.ndarray  # (r_p, c)
    bias: np.ndarray  # (r_p,)

    def __post_init__(self) -> None:
        self.w_top = np.asarray(self.w_top, dtype=np.float64)
        self.w_bot = np.asarray(self.w_bot, dtype=np.float64)
        self.w_ch = np.asarray(self.w_ch, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.w_top.shape != (self.r_p,) or self.w_bot.shape != (self.r_p,):
            raise ShapeError("edge weights must have shape (r_p,)")
        if self.w_ch.shape != (self.r_p, self.c):
            raise ShapeError("channel weights must have shape (r_p, c)")
        if self.bias.shape != (self.r_p,):
            raise ShapeError("bias must have shape (r_p,)")

    @property
    def signature(self) -> tuple[int, int, int, int]:
        return (self.h, self.w, self.c, self.r_p)

    @property
    def weight_count(self) -> int:
        return self.r_p * (self.c + 3)

    def to_json(self) -> str:
        obj = {
            "h": self.h,
            "w": self.w,
            "c": self.c,
            "r_p": self.r_p,
            "offsets": [
                {
                    "w_top": float(self.w_top[o]),
                    "w_bot": float(self.w_bot[o]),
                    "w_ch": [float(v) for v in self.w_ch[o]],
                    "bias": float(self.bias[o]),
                }
                for o in range(self.r_p)
            ],
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ALTeCWeights":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError("weights file is not valid JSON: %s" % exc) from exc
        try:
            offsets = obj["offsets"]
            return cls(
                h=int(obj["h"]),
                w=int(obj["w"]),
                c=int(obj["c"]),
                r_p=int(obj["r_p"]),
                w_top=np.array([o["w_top"] for o in offsets]),
                w_bot=np.array([o["w_bot"] for o in offsets]),
                w_ch=np.array([o["w_ch"] for o in offsets]),
                bias=np.array([o["bias"] for o in offsets]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError("malformed weights object: %s" % exc) from exc


def save_weights(w: ALTeCWeights, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(w.to_json())
        fh.write("\n")


def load_weights(path: str) -> ALTeCWeights:
    with open(path, "r", encoding="ascii") as fh:
        return ALTeCWeights.from_json(fh.read())


def _offset_design(
    x: np.ndarray, r_p: int, offset: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled (samples, c+3) design matrix and targets for one offset."""
    h, w, c = x.shape
    groups = [g for g in range(-(-h // r_p)) if g * r_p + offset < h]
    n_g = len(groups)
    if n_g == 0:
        return np.empty((0, c + 3)), np.empty((0,))
    k = c + 3
    top = np.zeros((n_g, w, c), dtype=np.float64)
    bot = np.zeros((n_g, w, c), dtype=np.float64)
    for gi, g in enumerate(groups):
        if g > 0:
            top[gi] = x[g * r_p - 1]
        if (g + 1) * r_p < h:
            bot[gi] = x[(g + 1) * r_p]
    rows = [g * r_p + offset for g in groups]
    colloc = x[rows].astype(np.float64)  # (n_g, w, c)
    design = np.zeros((n_g, w, c, k), dtype=np.float64)
    design[..., 0] = top
    design[..., 1] = bot
    design[..., 2 : 2 + c] = colloc[:, :, None, :]
    idx = np.arange(c)
    design[:, :, idx, 2 + idx] = 0.0  # self channel carries no weight
    design[..., -1] = 1.0
    return design.reshape(-1, k), colloc.reshape(-1)


def altec_train(corpus: list[FeatureTensor], r_p: int) -> ALTeCWeights:
    """Fit per-offset least squares weights over a tensor corpus.

    Normal equations are accumulated across tensors so the corpus never
    has to fit in memory at once; singular systems fall back to the
    least-norm solution via the pseudoinverse.
    """
    if not corpus:
        raise ParameterError("training corpus is empty")
    if r_p < 1:
        raise ParameterError("r_p must be >= 1")
    dims = corpus[0].dims
    for t in corpus:
        if t.dims != dims:
            raise ShapeError("corpus tensors disagree: %r vs %r" % (t.dims, dims))
    h, w, c = dims
    k = c + 3
    w_top = np.zeros(r_p)
    w_bot = np.zeros(r_p)
    w_ch = np.zeros((r_p, c))
    bias = np.zeros(r_p)
    for o in range(r_p):
        ata = np.zeros((k, k), dtype=np.float64)
        aty = np.zeros(k, dtype=np.float64)
        seen = 0
        for t in corpus:
            a, y = _offset_design(t.data.astype(np.float64), r_p, o)
            if a.shape[0] == 0:
                continue
            ata += a.T @ a
            aty += a.T @ y
            seen += a.shape[0]
        if seen == 0:
            continue  # offset never maps to a real row; weights stay zero
        # pinv(A^T A) @ A^T y is the least-norm least squares solution
        sol = np.linalg.pinv(ata, rcond=1e-12) @ aty
        w_top[o] = sol[0]
        w_bot[o] = sol[1]
        w_ch[o] = sol[2 : 2 + c]
        bias[o] = sol[-1]
    return ALTeCWeights(h, w, c, r_p, w_top, w_bot, w_ch, bias)


def altec_apply(
    t: FeatureTensor, packet_map: LossMap, weights: ALTeCWeights
) -> FeatureTensor:
    """Predict every lost packet row from the trained linear model.

    Regressors come from the zero-filled received tensor, so regressors
    that were themselves lost contribute zeros.
    """
    geo = PacketGeometry(weights.h, weights.w, weights.c, weights.r_p)
    if t.dims != (weights.h, weights.w, weights.c):
        raise ShapeError(
            "weights signature %r does not match tensor %r"
            % (weights.signature, t.dims)
        )
    if packet_map.n_packets != geo.n_packets:
        raise ShapeError(
            "loss map has %d packets, geometry %d"
            % (packet_map.n_packets, geo.n_packets)
        )
    lost = packet_map.lost
    if not lost.any():
        return FeatureTensor(t.data.copy(), dict(t.meta))
    x = t.data.astype(np.float64)
    out = x.copy()
    h, w, c = t.dims
    r_p = weights.r_p
    for p in np.flatnonzero(lost):
        ch, grp = geo.channel_group(int(p))
        top = x[grp * r_p - 1, :, ch] if grp > 0 else np.zeros(w)
        bot = x[(grp + 1) * r_p, :, ch] if (grp + 1) * r_p < h else np.zeros(w)
        for o in range(r_p):
            i = grp * r_p + o
            if i >= h:
                break
            colloc = x[i].copy()  # (w, c)
            colloc[:, ch] = 0.0
            out[i, :, ch] = (
                weights.w_top[o] * top
                + weights.w_bot[o] * bot
                + colloc @ weights.w_ch[o]
                + weights.bias[o]
            )
    result = out.astype(np.float32)
    for p in np.flatnonzero(~lost):
        ch, grp = geo.channel_group(int(p))
        start, stop = geo.group_rows(grp)
        result[start:stop, :, ch] = t.data[start:stop, :, ch]
    return FeatureTensor(result, dict(t.meta))
