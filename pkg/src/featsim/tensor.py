"""Feature tensor container, min-max quantization and quality metrics.

A feature tensor is a dense (h, w, c) block of float32 activations taken
from one layer of a network for one input image.  Quantization maps the
values onto ``2^n - 1`` uniform levels between the tensor-wide minimum
and maximum; the (t_min, t_max) pair travels as lossless side information
so dequantization is always possible at the receiver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import npyio
from .errors import ParameterError, ShapeError


@dataclass
class FeatureTensor:
    """One (h, w, c) activation block plus optional provenance strings."""

    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeError("feature tensor must be 3-D, got %d-D" % arr.ndim)
        if arr.size == 0:
            raise ShapeError("feature tensor dimensions must be positive")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature tensor contains NaN or Inf")
        self.data = np.ascontiguousarray(arr, dtype=np.float32)

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]

    @property
    def c(self) -> int:
        return self.data.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class QuantParams:
    """Side information for min-max dequantization."""

    n_bits: int
    t_min: float
    t_max: float

    def __post_init__(self) -> None:
        if not 1 <= self.n_bits <= 16:
            raise ParameterError("n_bits must be in [1, 16], got %r" % self.n_bits)
        if not (
            np.isfinite(self.t_min)
            and np.isfinite(self.t_max)
            and self.t_min <= self.t_max
        ):
            raise ParameterError(
                "need finite t_min <= t_max, got (%r, %r)" % (self.t_min, self.t_max)
            )

    @property
    def levels(self) -> int:
        return (1 << self.n_bits) - 1


@dataclass
class QuantizedTensor:
    """Integer codes plus the params needed to map them back to reals."""

    codes: np.ndarray
    params: QuantParams
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        codes = np.asarray(self.codes)
        if codes.ndim != 3:
            raise ShapeError("codes must be 3-D, got %d-D" % codes.ndim)
        if codes.size and int(codes.max()) > self.params.levels:
            raise ValueError(
                "code %d exceeds the %d-bit range"
                % (int(codes.max()), self.params.n_bits)
            )
        self.codes = np.ascontiguousarray(codes, dtype=np.uint16)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.codes.shape  # type: ignore[return-value]


def load_tensor(path: str) -> FeatureTensor:
    """Read one tensor file (strict NPY 1.0 float32 dialect)."""
    return FeatureTensor(npyio.load_tensor(path))


def save_tensor(t: FeatureTensor, path: str) -> None:
    """Write one tensor file readable by :func:`load_tensor`."""
    npyio.save_tensor(path, t.data)


def quantize(t: FeatureTensor, n_bits: int) -> QuantizedTensor:
    """Min-max quantize a tensor to ``n_bits`` bits per element.

    The range endpoints are the global min and max of the tensor.  Values
    are scaled to [0, 2^n - 1] and rounded half away from zero (not to
    even), so replays are bit-exact across platforms.  A constant tensor
    has a degenerate range and maps every element to code 0.
    """
    if not 1 <= n_bits <= 16:
        raise ParameterError("n_bits must be in [1, 16], got %r" % n_bits)
    values = t.data.astype(np.float64)
    t_min = float(values.min())
    t_max = float(values.max())
    params = QuantParams(n_bits=n_bits, t_min=t_min, t_max=t_max)
    if t_max == t_min:
        codes = np.zeros(t.dims, dtype=np.uint16)
        return QuantizedTensor(codes, params, dict(t.meta))
    scaled = (values - t_min) / (t_max - t_min) * params.levels
    # scaled >= 0, so floor(x + 0.5) is round-half-away-from-zero.
    codes = np.floor(scaled + 0.5)
    codes = np.clip(codes, 0, params.levels).astype(np.uint16)
    return QuantizedTensor(codes, params, dict(t.meta))


def dequantize(q: QuantizedTensor) -> FeatureTensor:
    """Map codes back to reals: x = code/(2^n - 1)·(t_max - t_min) + t_min."""
    p = q.params
    if p.t_max == p.t_min:
        data = np.full(q.dims, p.t_min, dtype=np.float64)
    else:
        data = q.codes.astype(np.float64) / p.levels * (p.t_max - p.t_min) + p.t_min
    return FeatureTensor(data.astype(np.float32), dict(q.meta))


def _as_arrays(a: FeatureTensor, b: FeatureTensor) -> tuple[np.ndarray, np.ndarray]:
    if a.dims != b.dims:
        raise ShapeError("dims differ: %r vs %r" % (a.dims, b.dims))
    return a.data.astype(np.float64), b.data.astype(np.float64)


def tensor_mse(a: FeatureTensor, b: FeatureTensor) -> float:
    """Mean squared difference over all elements, accumulated in float64."""
    x, y = _as_arrays(a, b)
    return float(np.mean((x - y) ** 2))


def tensor_psnr(a: FeatureTensor, b: FeatureTensor, peak: float) -> float:
    """PSNR in dB against the given peak; +inf when the tensors match."""
    mse = tensor_mse(a, b)
    if mse == 0.0:
        return float("inf")
    if peak == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(peak * peak / mse))
