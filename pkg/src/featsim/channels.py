"""Packet-loss channel models: perfect, iid, Gilbert-Elliott, trace replay.

The Gilbert-Elliott model is a two-state Markov chain over a good state G
(packet delivered) and a bad state B (packet lost), parameterized by the
stationary loss probability P_B and the average burst length L_B:

    p_BG = 1 / L_B
    p_GB = P_B / (L_B * (1 - P_B))
    p_BB = 1 - p_BG
    p_GG = 1 - p_GB

so bursts are geometric with mean L_B and the stationary probability of
state B is exactly P_B.  Each packet consumes one uniform draw from a
counter-based generator, which makes maps reproducible per (seed,
realization, tensor) regardless of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError, TraceExhaustedError
from .packets import LossMap

RNG_ALGORITHM = "philox4x64"


def make_stream(master_seed: int, realization: int, tensor_index: int) -> np.random.Generator:
    """Counter-based stream for one (realization, tensor) work item.

    The Philox key is (master_seed, realization * 2^32 + tensor_index),
    so streams never collide for realization and tensor indices below
    2^32 and parallel generation matches sequential generation bit for
    bit.
    """
    if master_seed < 0 or realization < 0 or tensor_index < 0:
        raise ParameterError("seed, realization and tensor index must be >= 0")
    key = np.array(
        [np.uint64(master_seed), np.uint64((realization << 32) + tensor_index)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class GEParams:
    """Gilbert-Elliott parameters with derived transition probabilities."""

    p_b: float
    l_b: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_b < 1.0:
            raise ParameterError("P_B must be in [0, 1), got %r" % self.p_b)
        if self.l_b < 1.0:
            raise ParameterError("L_B must be >= 1, got %r" % self.l_b)
        if self.p_gb > 1.0:
            raise ParameterError(
                "inadmissible pair (P_B=%g, L_B=%g): p_GB=%g > 1"
                % (self.p_b, self.l_b, self.p_gb)
            )

    @property
    def p_bg(self) -> float:
        return 1.0 / self.l_b

    @property
    def p_gb(self) -> float:
        if self.p_b == 0.0:
            return 0.0
        return self.p_b / (self.l_b * (1.0 - self.p_b))

    @property
    def p_bb(self) -> float:
        return 1.0 - self.p_bg

    @property
    def p_gg(self) -> float:
        return 1.0 - self.p_gb


def ge_from_pb_lb(p_b: float, l_b: float) -> GEParams:
    """Build GE parameters from (P_B, L_B), rejecting inadmissible pairs."""
    return GEParams(float(p_b), float(l_b))


def pb_lb_from_transitions(p_bg: float, p_gb: float) -> tuple[float, float]:
    """Invert the transition probabilities back to (P_B, L_B)."""
    if p_bg <= 0.0:
        raise ParameterError("p_BG must be positive")
    l_b = 1.0 / p_bg
    p_b = p_gb / (p_gb + p_bg) if p_gb > 0.0 else 0.0
    return p_b, l_b


def _ge_steps(
    uniforms: np.ndarray, params: GEParams, state: bool | None
) -> tuple[np.ndarray, bool]:
    """Advance the chain one step per uniform; True state = bad (lost).

    When ``state`` is None the first uniform samples the stationary
    distribution instead of a transition.
    """
    n = uniforms.size
    p_gb = params.p_gb
    p_bg = params.p_bg
    u = uniforms.tolist()
    out = [False] * n
    start = 0
    if state is None:
        state = u[0] < params.p_b
        out[0] = state
        start = 1
    s = bool(state)
    for t in range(start, n):
        if s:
            s = u[t] >= p_bg
        else:
            s = u[t] < p_gb
        out[t] = s
    return np.array(out, dtype=bool), s


def simulate_ge(n_packets: int, params: GEParams, seed: int) -> LossMap:
    """One stationary-start GE realization of ``n_packets`` packets."""
    if n_packets < 1:
        raise ParameterError("n_packets must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    lost, _ = _ge_steps(rng.random(n_packets), params, None)
    return LossMap(lost)


def simulate_iid(n_packets: int, p_loss: float, seed: int) -> LossMap:
    """Independent per-packet loss with probability ``p_loss``."""
    if n_packets < 1:
        raise ParameterError("n_packets must be >= 1")
    if not 0.0 <= p_loss <= 1.0:
        raise ParameterError("p_loss must be in [0, 1], got %r" % p_loss)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    return LossMap(rng.random(n_packets) < p_loss)


class GEBatch:
    """One GE chain advanced across every tensor of one realization.

    The Markov state carries over from tensor to tensor (the chain is not
    restarted), but each tensor consumes uniforms from its own
    (realization, tensor) stream so maps are independent of how the batch
    is scheduled.
    """

    def __init__(self, params: GEParams, master_seed: int, realization: int) -> None:
        self.params = params
        self.master_seed = master_seed
        self.realization = realization
        self._state: bool | None = None
        self._next_tensor = 0

    def next_map(self, n_packets: int) -> LossMap:
        if n_packets < 1:
            raise ParameterError("n_packets must be >= 1")
        rng = make_stream(self.master_seed, self.realization, self._next_tensor)
        lost, self._state = _ge_steps(rng.random(n_packets), self.params, self._state)
        self._next_tensor += 1
        return LossMap(lost)


class IIDBatch:
    """Per-tensor iid maps from (realization, tensor) streams."""

    def __init__(self, p_loss: float, master_seed: int, realization: int) -> None:
        if not 0.0 <= p_loss <= 1.0:
            raise ParameterError("p_loss must be in [0, 1], got %r" % p_loss)
        self.p_loss = p_loss
        self.master_seed = master_seed
        self.realization = realization
        self._next_tensor = 0

    def next_map(self, n_packets: int) -> LossMap:
        rng = make_stream(self.master_seed, self.realization, self._next_tensor)
        self._next_tensor += 1
        return LossMap(rng.random(n_packets) < self.p_loss)


class PerfectBatch:
    """No loss at all; every map is all-received."""

    def next_map(self, n_packets: int) -> LossMap:
        return LossMap(np.zeros(n_packets, dtype=bool))


class TraceStream:
    """A captured 0/1 loss trace consumed sequentially across tensors."""

    def __init__(self, tokens: np.ndarray) -> None:
        self.tokens = np.ascontiguousarray(np.asarray(tokens), dtype=bool)
        self.position = 0

    @property
    def remaining(self) -> int:
        return int(self.tokens.size - self.position)

    def next_map(self, n_packets: int) -> LossMap:
        if self.remaining < n_packets:
            raise TraceExhaustedError(
                "trace has %d tokens left, tensor needs %d" % (self.remaining, n_packets)
            )
        chunk = self.tokens[self.position : self.position + n_packets]
        self.position += n_packets
        return LossMap(chunk.copy())


def parse_trace(text: str) -> TraceStream:
    """Parse whitespace-separated 0/1 tokens; '#' lines are comments."""
    values: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        for token in stripped.split():
            if token == "0":
                values.append(0)
            elif token == "1":
                values.append(1)
            else:
                raise FormatError(
                    "trace line %d: token %r is not 0 or 1" % (lineno, token)
                )
    if not values:
        raise FormatError("trace holds no 0/1 tokens")
    return TraceStream(np.array(values, dtype=bool))


def read_trace(path: str) -> TraceStream:
    with open(path, "r", encoding="ascii") as fh:
        return parse_trace(fh.read())


def load_trace(path: str, n_packets: int) -> LossMap:
    """Read a trace file and take its first ``n_packets`` entries."""
    return read_trace(path).next_map(n_packets)


def save_trace(m: LossMap, path: str, header: str | None = None) -> None:
    """Write a loss map as a 0/1 token file (one run of 64 per line)."""
    tokens = ["1" if v else "0" for v in m.lost]
    lines = [" ".join(tokens[i : i + 64]) for i in range(0, len(tokens), 64)]
    with open(path, "w", encoding="ascii") as fh:
        if header:
            fh.write("# %s\n" % header)
        fh.write("\n".join(lines))
        fh.write("\n")


def burst_lengths(m: LossMap) -> np.ndarray:
    """Lengths of maximal runs of lost packets (for empirical checks)."""
    padded = np.concatenate(([False], m.lost, [False]))
    diff = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(diff == 1)
    stops = np.flatnonzero(diff == -1)
    return stops - starts
