"""Channel-correlation concealment with per-packet affine substitution.

For every lost packet the most correlated other channel (restricted to
rows both channels received) donates its collocated block through a least
squares affine map a*x + b.  Channels with too little shared support or
zero variance cannot be scored and are skipped; when no candidate
survives, the lost block becomes the mean of the received collocated
blocks, and if the whole row group vanished across channels it stays
zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..packets import LossMap, PacketGeometry
from ..tensor import FeatureTensor


def _received_rows(geo: PacketGeometry, lost: np.ndarray) -> np.ndarray:
    """Boolean (c, h) table: row r of channel ch arrived intact."""
    table = np.empty((geo.c, geo.h), dtype=bool)
    for ch in range(geo.c):
        for grp in range(geo.groups_per_channel):
            start, stop = geo.group_rows(grp)
            table[ch, start:stop] = not lost[geo.packet_index(ch, grp)]
    return table


def caltec(t: FeatureTensor, packet_map: LossMap, geo: PacketGeometry) -> FeatureTensor:
    """Fill lost packets from the best affinely matching channel."""
    if geo.dims() != t.dims:
        raise ShapeError("geometry %r does not match tensor %r" % (geo.dims(), t.dims))
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
    rows_ok = _received_rows(geo, lost)
    for p in np.flatnonzero(lost):
        ch, grp = geo.channel_group(int(p))
        start, stop = geo.group_rows(grp)
        best_ch = -1
        best_corr = -1.0
        best_fit: tuple[float, float] | None = None
        for cand in range(geo.c):
            if cand == ch:
                continue
            if lost[geo.packet_index(cand, grp)]:
                continue
            shared = rows_ok[ch] & rows_ok[cand]
            if int(shared.sum()) < 2:
                continue
            ref = x[shared, :, ch].ravel()
            src = x[shared, :, cand].ravel()
            ref_var = ref.var()
            src_var = src.var()
            if ref_var == 0.0 or src_var == 0.0:
                continue
            corr = abs(
                float(np.mean((ref - ref.mean()) * (src - src.mean())))
                / np.sqrt(ref_var * src_var)
            )
            # strict > with ascending cand implements "tie -> lowest index"
            if corr > best_corr:
                best_corr = corr
                best_ch = cand
                slope = float(np.mean((ref - ref.mean()) * (src - src.mean())) / src_var)
                intercept = float(ref.mean() - slope * src.mean())
                best_fit = (slope, intercept)
        if best_fit is not None:
            a, b = best_fit
            out[start:stop, :, ch] = a * x[start:stop, :, best_ch] + b
            continue
        donors = [
            cand
            for cand in range(geo.c)
            if cand != ch and not lost[geo.packet_index(cand, grp)]
        ]
        if donors:
            out[start:stop, :, ch] = x[start:stop, :, donors].mean(axis=2)
        # else: nothing arrived at this group anywhere; keep zeros
    result = out.astype(np.float32)
    # received packets must survive bit-exactly
    for p in np.flatnonzero(~lost):
        ch, grp = geo.channel_group(int(p))
        start, stop = geo.group_rows(grp)
        result[start:stop, :, ch] = t.data[start:stop, :, ch]
    return FeatureTensor(result, dict(t.meta))
