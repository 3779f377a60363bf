"""SVT and the two low-rank completions on synthetic oracles."""

import numpy as np
import pytest

from featsim.channels import ge_from_pb_lb, simulate_ge
from featsim.conceal import CompletionConfig, fold, halrtc, silrtc, svt, unfold
from featsim.errors import ParameterError
from featsim.packets import apply_loss, packetize
from featsim.tensor import FeatureTensor


def _rank1_case(factor_seed=2024, loss_seed=15):
    """CP rank-1 (16,16,8) tensor with ~20% of packets lost via GE."""
    rng = np.random.default_rng(factor_seed)
    a = 0.5 + rng.random(16)
    b = 0.5 + rng.random(16)
    c = 0.5 + rng.random(8)
    x = np.einsum("i,j,k->ijk", a, b, c).astype(np.float32)
    t = FeatureTensor(x)
    p = packetize(t, 4)
    m = simulate_ge(p.geometry.n_packets, ge_from_pb_lb(0.2, 1.0), seed=loss_seed)
    corrupted, mask = apply_loss(p, m)
    return x.astype(np.float64), corrupted, mask


def _rel_err_on_lost(out, ref, mask) -> float:
    lost = ~mask
    return float(
        np.linalg.norm(out.data.astype(np.float64)[lost] - ref[lost])
        / np.linalg.norm(ref[lost])
    )


def test_unfold_shapes_reference_case() -> None:
    x = np.zeros((56, 56, 64))
    assert unfold(x, 0).shape == (56, 56 * 64)
    assert unfold(x, 1).shape == (56, 56 * 64)
    assert unfold(x, 2).shape == (64, 56 * 56)


def test_unfold_fold_inverse() -> None:
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 7, 3))
    for mode in range(3):
        assert np.array_equal(fold(unfold(x, mode), mode, x.shape), x)


def test_svt_tau_zero_is_identity() -> None:
    rng = np.random.default_rng(2)
    m = rng.normal(size=(8, 12))
    out = svt(m, 0.0)
    assert np.linalg.norm(out - m) / np.linalg.norm(m) < 1e-6


def test_svt_rank1_closed_form() -> None:
    u = np.array([[1.0], [2.0], [2.0]]) / 3.0
    v = np.array([[3.0, 0.0, 4.0]]) / 5.0
    m = 10.0 * u @ v  # single singular value 10
    out = svt(m, 4.0)
    s = np.linalg.svd(out, compute_uv=False)
    assert s[0] == pytest.approx(6.0, abs=1e-9)
    assert np.all(s[1:] < 1e-9)


def test_svt_full_shrinkage_gives_zero() -> None:
    rng = np.random.default_rng(3)
    m = rng.normal(size=(6, 6))
    sigma_max = np.linalg.svd(m, compute_uv=False)[0]
    assert np.all(svt(m, sigma_max + 1.0) == 0.0)


def test_completion_config_validation() -> None:
    with pytest.raises(ParameterError):
        CompletionConfig(iterations=0)
    with pytest.raises(ParameterError):
        CompletionConfig(alphas=(0.5, 0.5, 0.1))
    with pytest.raises(ParameterError):
        CompletionConfig(halrtc_rho=0.0)
    cfg = CompletionConfig(tau=2.0)
    assert cfg.silrtc_taus == pytest.approx((2.0 / 3, 2.0 / 3, 2.0 / 3))


def test_no_lost_elements_is_identity() -> None:
    rng = np.random.default_rng(4)
    t = FeatureTensor(rng.normal(size=(6, 5, 4)).astype(np.float32))
    mask = np.ones(t.dims, dtype=bool)
    cfg = CompletionConfig(iterations=3)
    assert np.array_equal(silrtc(t, mask, cfg).data, t.data)
    assert np.array_equal(halrtc(t, mask, cfg).data, t.data)


def test_projection_preserves_available_bits() -> None:
    ref, corrupted, mask = _rank1_case()
    cfg = CompletionConfig(iterations=10)
    for method in (silrtc, halrtc):
        out = method(corrupted, mask, cfg)
        assert np.array_equal(out.data[mask], corrupted.data[mask])


def test_silrtc_recovers_rank1_oracle() -> None:
    ref, corrupted, mask = _rank1_case()
    hist: list = []
    out = silrtc(
        corrupted, mask, CompletionConfig(iterations=500, tau=0.5), diff_history=hist
    )
    assert _rel_err_on_lost(out, ref, mask) < 1e-2
    assert hist[49] <= hist[9]  # plateau: diff at 50 below diff at 10
    assert hist[-1] < hist[0]


def test_halrtc_recovers_rank1_oracle() -> None:
    ref, corrupted, mask = _rank1_case()
    hist: list = []
    out = halrtc(corrupted, mask, CompletionConfig(iterations=500), diff_history=hist)
    assert _rel_err_on_lost(out, ref, mask) < 1e-3
    assert hist[-1] < hist[0]


def test_halrtc_scattered_elementwise_recovery() -> None:
    # iid element loss is the easy regime; recovery should be near exact
    rng = np.random.default_rng(11)
    a = 0.5 + rng.random(12)
    b = 0.5 + rng.random(10)
    c = 0.5 + rng.random(6)
    x = np.einsum("i,j,k->ijk", a, b, c).astype(np.float32)
    mask = rng.random(x.shape) > 0.2
    corrupted = x.copy()
    corrupted[~mask] = 0.0
    out = halrtc(FeatureTensor(corrupted), mask, CompletionConfig(iterations=400))
    assert _rel_err_on_lost(out, x.astype(np.float64), mask) < 1e-5


def test_halrtc_duals_stay_bounded() -> None:
    rng = np.random.default_rng(12)
    t = FeatureTensor(rng.normal(size=(10, 10, 5)).astype(np.float32))
    mask = rng.random(t.dims) > 0.3
    duals: list = []
    halrtc(t, mask, CompletionConfig(iterations=500), dual_history=duals)
    assert np.isfinite(duals).all()
    # dual growth must flatten out, not diverge
    assert max(duals[-100:]) <= max(duals) * 1.0 + 1e-9
    assert max(duals) < 1e3


def test_tolerance_early_stop() -> None:
    ref, corrupted, mask = _rank1_case()
    hist: list = []
    silrtc(
        corrupted,
        mask,
        CompletionConfig(iterations=500, tau=0.5, tolerance=1e-4),
        diff_history=hist,
    )
    assert len(hist) < 500
    assert hist[-1] < 1e-4


def test_all_lost_mask_rejected() -> None:
    t = FeatureTensor(np.zeros((4, 4, 2), dtype=np.float32))
    mask = np.zeros(t.dims, dtype=bool)
    with pytest.raises(ParameterError):
        silrtc(t, mask)
    with pytest.raises(ParameterError):
        halrtc(t, mask)
