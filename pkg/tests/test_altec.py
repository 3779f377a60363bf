"""Pre-trained linear packet concealment: training and application."""

import numpy as np
import pytest

from featsim.conceal import (
    ALTeCWeights,
    altec_apply,
    altec_train,
    load_weights,
    save_weights,
)
from featsim.errors import ShapeError
from featsim.packets import LossMap, apply_loss, packetize
from featsim.tensor import FeatureTensor


def _loss(geometry, pairs) -> LossMap:
    lost = np.zeros(geometry.n_packets, dtype=bool)
    for ch, grp in pairs:
        lost[geometry.packet_index(ch, grp)] = True
    return LossMap(lost)


def test_weight_count_invariant() -> None:
    rng = np.random.default_rng(8)
    corpus = [FeatureTensor(rng.random((12, 6, 5)).astype(np.float32))]
    w = altec_train(corpus, r_p=4)
    assert w.weight_count == 4 * (5 + 3)
    assert w.w_ch.shape == (4, 5)


def test_identical_channels_mass_on_collocated() -> None:
    rng = np.random.default_rng(18)
    corpus = []
    for _ in range(3):
        plane = rng.normal(size=(12, 8)).astype(np.float32)
        corpus.append(FeatureTensor(np.repeat(plane[:, :, None], 6, axis=2)))
    w = altec_train(corpus, r_p=4)
    # effective collocated mass per predicted channel is ~1, edges ~0
    for ch in range(6):
        mass = w.w_ch.sum(axis=1) - w.w_ch[:, ch]
        assert np.allclose(mass, 1.0, atol=1e-6)
    assert np.allclose(w.w_top, 0.0, atol=1e-6)
    assert np.allclose(w.w_bot, 0.0, atol=1e-6)
    # prediction on a corpus member with a lost packet is near exact
    t = corpus[0]
    m = _loss(packetize(t, 4).geometry, [(2, 1)])
    zero_filled = t.data.copy()
    zero_filled[4:8, :, 2] = 0.0
    out = altec_apply(FeatureTensor(zero_filled), m, w)
    assert np.abs(out.data - t.data).max() < 1e-5


def test_constant_channels_zero_residual() -> None:
    rng = np.random.default_rng(28)
    corpus = []
    for _ in range(2):
        consts = rng.uniform(1.0, 5.0, size=4).astype(np.float32)
        corpus.append(FeatureTensor(np.broadcast_to(consts, (8, 6, 4)).copy()))
    w = altec_train(corpus, r_p=4)
    t = corpus[0]
    m = _loss(packetize(t, 4).geometry, [(1, 1)])
    zero_filled = t.data.copy()
    zero_filled[4:8, :, 1] = 0.0
    out = altec_apply(FeatureTensor(zero_filled), m, w)
    assert np.abs(out.data - t.data).max() < 1e-5


def test_exact_recovery_on_model_consistent_data() -> None:
    # X[:, :, z] = s_z * base admits an exact collocated-only model,
    # so training followed by applying must reconstruct a lost packet.
    rng = np.random.default_rng(38)
    scales = rng.uniform(0.5, 2.0, size=6)
    corpus = []
    for _ in range(2):
        base = rng.normal(size=(16, 10))
        x = np.einsum("ij,z->ijz", base, scales).astype(np.float32)
        corpus.append(FeatureTensor(x))
    w = altec_train(corpus, r_p=4)
    t = corpus[1]
    geo = packetize(t, 4).geometry
    m = _loss(geo, [(3, 1)])
    zero_filled = t.data.copy()
    zero_filled[4:8, :, 3] = 0.0
    out = altec_apply(FeatureTensor(zero_filled), m, w)
    assert np.abs(out.data - t.data).max() < 1e-5


def test_no_loss_is_identity() -> None:
    rng = np.random.default_rng(48)
    t = FeatureTensor(rng.random((8, 5, 3)).astype(np.float32))
    w = altec_train([t], r_p=4)
    geo = packetize(t, 4).geometry
    m = LossMap(np.zeros(geo.n_packets, dtype=bool))
    out = altec_apply(t, m, w)
    assert np.array_equal(out.data, t.data)


def test_collocated_zeroed_when_group_fully_lost() -> None:
    # hand-built weights make the expected fill easy to compute
    h, width, c, r_p = 12, 5, 3, 4
    w = ALTeCWeights(
        h,
        width,
        c,
        r_p,
        w_top=np.full(r_p, 0.5),
        w_bot=np.full(r_p, 0.5),
        w_ch=np.zeros((r_p, c)),
        bias=np.full(r_p, 1.0),
    )
    t = FeatureTensor(np.full((h, width, c), 2.0, dtype=np.float32))
    geo = packetize(t, r_p).geometry
    pairs = [(ch, 1) for ch in range(c)]  # middle group lost everywhere
    m = _loss(geo, pairs)
    zero_filled = t.data.copy()
    zero_filled[4:8] = 0.0
    out = altec_apply(FeatureTensor(zero_filled), m, w)
    # 0.5*2 (top) + 0.5*2 (bottom) + 0 (collocated all lost) + 1 = 3
    assert np.allclose(out.data[4:8], 3.0)
    assert np.allclose(out.data[:4], 2.0)
    assert np.allclose(out.data[8:], 2.0)


def test_received_packets_bit_exact() -> None:
    rng = np.random.default_rng(58)
    t = FeatureTensor(rng.normal(size=(16, 6, 4)).astype(np.float32))
    w = altec_train([t], r_p=4)
    p = packetize(t, 4)
    m = _loss(p.geometry, [(0, 0), (2, 3)])
    zero_filled, mask = apply_loss(p, m)
    out = altec_apply(zero_filled, m, w)
    assert np.array_equal(out.data[mask], t.data[mask])


def test_weights_json_round_trip(tmp_path) -> None:
    rng = np.random.default_rng(68)
    t = FeatureTensor(rng.random((8, 5, 3)).astype(np.float32))
    w = altec_train([t], r_p=4)
    path = str(tmp_path / "weights.json")
    save_weights(w, path)
    back = load_weights(path)
    assert back.signature == w.signature
    assert np.array_equal(back.w_top, w.w_top)
    assert np.array_equal(back.w_bot, w.w_bot)
    assert np.array_equal(back.w_ch, w.w_ch)
    assert np.array_equal(back.bias, w.bias)


def test_signature_mismatch_is_shape_error() -> None:
    rng = np.random.default_rng(78)
    t = FeatureTensor(rng.random((8, 5, 3)).astype(np.float32))
    w = altec_train([t], r_p=4)
    other = FeatureTensor(rng.random((8, 5, 4)).astype(np.float32))
    geo = packetize(other, 4).geometry
    with pytest.raises(ShapeError):
        altec_apply(other, LossMap(np.zeros(geo.n_packets, dtype=bool)), w)


def test_corpus_shape_disagreement_rejected() -> None:
    rng = np.random.default_rng(88)
    a = FeatureTensor(rng.random((8, 5, 3)).astype(np.float32))
    b = FeatureTensor(rng.random((8, 6, 3)).astype(np.float32))
    with pytest.raises(ShapeError):
        altec_train([a, b], r_p=4)
