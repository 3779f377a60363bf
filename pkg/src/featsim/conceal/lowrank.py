"""Low-rank tensor completion: singular value thresholding, SiLRTC, HaLRTC.

Both completions treat the corrupted tensor as a partially observed 3-way
array and push each mode-i unfolding toward low rank via singular value
shrinkage, keeping the received entries fixed (projection onto the
observed set after every iteration).  SiLRTC averages the per-mode
shrunken reconstructions directly; HaLRTC is the ADMM variant with one
dual tensor per mode and a fixed penalty rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import NumericalError, ParameterError, ShapeError
from ..tensor import FeatureTensor


@dataclass(frozen=True)
class CompletionConfig:
    """Shared knobs for the iterative completions.

    silrtc_taus defaults to alphas scaled by ``tau``; tolerance 0 disables
    the early stop so exactly ``iterations`` passes run.
    """

    iterations: int = 50
    alphas: tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    tau: float = 1.0
    silrtc_taus: tuple[float, float, float] | None = None
    halrtc_rho: float = 1e-2
    tolerance: float = 0.0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if len(self.alphas) != 3 or any(a < 0 for a in self.alphas):
            raise ParameterError("alphas must be 3 non-negative reals")
        if abs(sum(self.alphas) - 1.0) > 1e-12:
            raise ParameterError("alphas must sum to 1 within 1e-12")
        if self.silrtc_taus is None:
            object.__setattr__(
                self, "silrtc_taus", tuple(a * self.tau for a in self.alphas)
            )
        if len(self.silrtc_taus) != 3 or any(t <= 0 for t in self.silrtc_taus):
            raise ParameterError("silrtc_taus must be 3 positive reals")
        if self.halrtc_rho <= 0:
            raise ParameterError("halrtc_rho must be > 0")
        if self.tolerance < 0:
            raise ParameterError("tolerance must be >= 0")


def unfold(x: np.ndarray, mode: int) -> np.ndarray:
    """Mode-i matricization: mode fibers become rows of a 2-D array."""
    return np.moveaxis(x, mode, 0).reshape(x.shape[mode], -1)


def fold(mat: np.ndarray, mode: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold` for the given full tensor shape."""
    moved = [shape[mode]] + [shape[i] for i in range(3) if i != mode]
    return np.moveaxis(mat.reshape(moved), 0, mode)


def svt(mat: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: U diag(max(s - tau, 0)) V^T."""
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    m = np.asarray(mat, dtype=np.float64)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but sturdier
        try:
            u, s, vt = scipy.linalg.svd(
                m, full_matrices=False, lapack_driver="gesvd"
            )
        except Exception as exc:
            raise NumericalError("SVD did not converge") from exc
    shrunk = np.maximum(s - tau, 0.0)
    return (u * shrunk) @ vt


def _check_inputs(t: FeatureTensor, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != t.dims:
        raise ShapeError("mask shape %r != tensor dims %r" % (mask.shape, t.dims))
    if not mask.any():
        raise ParameterError("completion needs at least one available element")
    return mask


def silrtc(
    t: FeatureTensor,
    mask: np.ndarray,
    cfg: CompletionConfig | None = None,
    diff_history: list | None = None,
) -> FeatureTensor:
    """Simple low-rank tensor completion by averaged per-mode shrinkage.

    Each pass computes M_i = fold_i(svt(unfold_i(X), tau_i)) for the three
    modes and overwrites the lost positions with sum_i alpha_i * M_i; the
    received positions are reset to their exact input values.  Appends the
    Frobenius norm of each iterate change to ``diff_history`` if given.
    """
    cfg = cfg or CompletionConfig()
    mask = _check_inputs(t, mask)
    lost = ~mask
    orig = t.data.astype(np.float64)
    x = orig.copy()
    shape = t.dims
    for _ in range(cfg.iterations):
        blend = np.zeros(shape, dtype=np.float64)
        for i in range(3):
            blend += cfg.alphas[i] * fold(svt(unfold(x, i), cfg.silrtc_taus[i]), i, shape)
        x_new = orig.copy()
        x_new[lost] = blend[lost]
        diff = float(np.linalg.norm(x_new - x))
        if diff_history is not None:
            diff_history.append(diff)
        x = x_new
        if cfg.tolerance > 0 and diff < cfg.tolerance:
            break
    out = x.astype(np.float32)
    out[mask] = t.data[mask]  # projection must be bit-exact after the cast
    return FeatureTensor(out, dict(t.meta))


def halrtc(
    t: FeatureTensor,
    mask: np.ndarray,
    cfg: CompletionConfig | None = None,
    diff_history: list | None = None,
    dual_history: list | None = None,
) -> FeatureTensor:
    """High-accuracy completion: ADMM with one dual tensor per mode.

    Per pass: M_i = fold_i(svt(unfold_i(X + Y_i/rho), alpha_i/rho)), then
    X takes mean_i(M_i - Y_i/rho) on the lost positions and the exact
    input values on the received ones, then Y_i -= rho * (M_i - X).
    """
    cfg = cfg or CompletionConfig()
    mask = _check_inputs(t, mask)
    lost = ~mask
    orig = t.data.astype(np.float64)
    x = orig.copy()
    shape = t.dims
    rho = cfg.halrtc_rho
    ys = [np.zeros(shape, dtype=np.float64) for _ in range(3)]
    for _ in range(cfg.iterations):
        ms = [
            fold(svt(unfold(x + ys[i] / rho, i), cfg.alphas[i] / rho), i, shape)
            for i in range(3)
        ]
        mean = (ms[0] - ys[0] / rho + ms[1] - ys[1] / rho + ms[2] - ys[2] / rho) / 3.0
        x_new = orig.copy()
        x_new[lost] = mean[lost]
        diff = float(np.linalg.norm(x_new - x))
        if diff_history is not None:
            diff_history.append(diff)
        x = x_new
        for i in range(3):
            ys[i] -= rho * (ms[i] - x)
        if dual_history is not None:
            dual_history.append(max(float(np.abs(y).max()) for y in ys))
        if cfg.tolerance > 0 and diff < cfg.tolerance:
            break
    out = x.astype(np.float32)
    out[mask] = t.data[mask]
    return FeatureTensor(out, dict(t.meta))
