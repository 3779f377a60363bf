"""Row-group packetization of feature tensors and loss application.

Each channel is split into G = ceil(h / r_p) groups of r_p rows; the last
group of every channel is zero-padded up to r_p rows.  One packet carries
one (r_p, w) block.  Packets are numbered channel-major by default
(p = channel * G + group); the alternative group-major numbering
(p = group * c + channel) is kept so a burst on the wire can hit either
consecutive groups of one channel or one group across channels.  Loss is
all-or-nothing per packet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ParameterError, ShapeError
from .tensor import FeatureTensor

ORDERS = ("channel-major", "group-major")


@dataclass(frozen=True)
class PacketGeometry:
    """Static packet layout for one tensor shape and packet size."""

    h: int
    w: int
    c: int
    r_p: int
    order: str = "channel-major"

    def __post_init__(self) -> None:
        if min(self.h, self.w, self.c) < 1:
            raise ShapeError("tensor dims must be positive")
        if self.r_p < 1:
            raise ParameterError("r_p must be >= 1, got %r" % self.r_p)
        if self.order not in ORDERS:
            raise ParameterError("unknown packet order %r" % self.order)

    @property
    def groups_per_channel(self) -> int:
        return -(-self.h // self.r_p)

    @property
    def pad_rows(self) -> int:
        return self.groups_per_channel * self.r_p - self.h

    @property
    def n_packets(self) -> int:
        return self.c * self.groups_per_channel

    def packet_index(self, channel: int, group: int) -> int:
        if self.order == "channel-major":
            return channel * self.groups_per_channel + group
        return group * self.c + channel

    def channel_group(self, p: int) -> tuple[int, int]:
        """Inverse of packet_index: packet p -> (channel, group)."""
        g = self.groups_per_channel
        if not 0 <= p < self.n_packets:
            raise ShapeError("packet index %d out of [0, %d)" % (p, self.n_packets))
        if self.order == "channel-major":
            return p // g, p % g
        return p % self.c, p // self.c

    def group_rows(self, group: int) -> tuple[int, int]:
        """Real (unpadded) row span [start, stop) carried by a group."""
        start = group * self.r_p
        return start, min(start + self.r_p, self.h)

    def dims(self) -> tuple[int, int, int]:
        return (self.h, self.w, self.c)


@dataclass
class PacketizedTensor:
    """All packets of one tensor as an (n_packets, r_p, w) stack."""

    geometry: PacketGeometry
    packets: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = (self.geometry.n_packets, self.geometry.r_p, self.geometry.w)
        if tuple(self.packets.shape) != expected:
            raise ShapeError(
                "packet stack %r does not match geometry %r"
                % (self.packets.shape, expected)
            )


@dataclass
class LossMap:
    """Per-packet Boolean losses (True = packet lost)."""

    lost: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.lost)
        if arr.ndim != 1 or arr.size < 1:
            raise ShapeError("loss map must be a non-empty 1-D sequence")
        self.lost = np.ascontiguousarray(arr, dtype=bool)

    @property
    def n_packets(self) -> int:
        return int(self.lost.size)

    @property
    def n_lost(self) -> int:
        return int(self.lost.sum())


def packetize(t: FeatureTensor, r_p: int, order: str = "channel-major") -> PacketizedTensor:
    """Split a tensor into zero-padded (r_p, w) row-group packets."""
    geo = PacketGeometry(t.h, t.w, t.c, r_p, order)
    g = geo.groups_per_channel
    padded = np.zeros((g * r_p, t.w, t.c), dtype=np.float32)
    padded[: t.h] = t.data
    stack = np.empty((geo.n_packets, r_p, t.w), dtype=np.float32)
    for ch in range(t.c):
        for grp in range(g):
            p = geo.packet_index(ch, grp)
            stack[p] = padded[grp * r_p : (grp + 1) * r_p, :, ch]
    return PacketizedTensor(geo, stack, dict(t.meta))


def depacketize(p: PacketizedTensor) -> FeatureTensor:
    """Reassemble the tensor, stripping the zero padding of last groups."""
    geo = p.geometry
    padded = np.empty((geo.groups_per_channel * geo.r_p, geo.w, geo.c), dtype=np.float32)
    for ch in range(geo.c):
        for grp in range(geo.groups_per_channel):
            idx = geo.packet_index(ch, grp)
            padded[grp * geo.r_p : (grp + 1) * geo.r_p, :, ch] = p.packets[idx]
    return FeatureTensor(padded[: geo.h], dict(p.meta))


def apply_loss(p: PacketizedTensor, m: LossMap) -> tuple[FeatureTensor, np.ndarray]:
    """Zero out lost packets and report element availability.

    Returns the zero-filled tensor and a Boolean (h, w, c) mask that is
    True where the element arrived.  Padding rows never reach the output
    so they carry no mask semantics.
    """
    geo = p.geometry
    if m.n_packets != geo.n_packets:
        raise ShapeError(
            "loss map has %d packets, tensor has %d" % (m.n_packets, geo.n_packets)
        )
    data = np.empty((geo.h, geo.w, geo.c), dtype=np.float32)
    mask = np.ones((geo.h, geo.w, geo.c), dtype=bool)
    for ch in range(geo.c):
        for grp in range(geo.groups_per_channel):
            idx = geo.packet_index(ch, grp)
            start, stop = geo.group_rows(grp)
            if m.lost[idx]:
                data[start:stop, :, ch] = 0.0
                mask[start:stop, :, ch] = False
            else:
                data[start:stop, :, ch] = p.packets[idx, : stop - start]
    return FeatureTensor(data, dict(p.meta)), mask


def loss_map_to_json(m: LossMap, geo: PacketGeometry) -> str:
    """Serialize a loss map plus the geometry it applies to."""
    obj = {
        "n_packets": m.n_packets,
        "lost": [int(v) for v in m.lost],
        "order": geo.order,
        "tensor_dims": [geo.h, geo.w, geo.c],
        "r_p": geo.r_p,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def loss_map_from_json(text: str) -> tuple[LossMap, PacketGeometry]:
    """Parse a loss-map file produced by :func:`loss_map_to_json`."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("loss map is not valid JSON: %s" % exc) from exc
    try:
        dims = obj["tensor_dims"]
        geo = PacketGeometry(
            int(dims[0]), int(dims[1]), int(dims[2]), int(obj["r_p"]), str(obj["order"])
        )
        lost = np.array([int(v) for v in obj["lost"]], dtype=bool)
        n = int(obj["n_packets"])
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise FormatError("malformed loss-map object: %s" % exc) from exc
    if n != lost.size:
        raise FormatError("n_packets %d does not match lost length %d" % (n, lost.size))
    if n != geo.n_packets:
        raise FormatError(
            "n_packets %d inconsistent with geometry (%d expected)" % (n, geo.n_packets)
        )
    return LossMap(lost), geo


def save_loss_map(m: LossMap, geo: PacketGeometry, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(loss_map_to_json(m, geo))
        fh.write("\n")


def load_loss_map(path: str) -> tuple[LossMap, PacketGeometry]:
    with open(path, "r", encoding="ascii") as fh:
        return loss_map_from_json(fh.read())
