import numpy as np
import pytest

from osfuse.core.errors import ContractError, InputError
from osfuse.core.gradcheck import finite_diff_check
from osfuse.fusion.area_attention import (
    AFMParams,
    AreaConfig,
    FlopCounter,
    afm_fuse,
    area_merge,
    area_partition,
    attention_weights,
)
from osfuse.fusion.scan_orders import FeatureMap


def softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def reference_block(o, s, w_q, w_k):
    """Fusion of two (m, C) token sets inside one block."""
    scale = 1.0 / np.sqrt(w_q.shape[1])
    att_os = softmax((o @ w_q) @ (s @ w_k).T * scale) @ s
    att_so = softmax((s @ w_q) @ (o @ w_k).T * scale) @ o
    return (att_os + att_so + (o + s) / 2.0) / 3.0


def reference_fuse(o, s, params, k, axis):
    w_q, w_k = params.w_q.data, params.w_k.data
    out = np.empty_like(o)
    channels = o.shape[-1]
    if axis == "horizontal":
        size = o.shape[0] // k
        for i in range(k):
            band = slice(i * size, (i + 1) * size)
            fused = reference_block(o[band].reshape(-1, channels), s[band].reshape(-1, channels), w_q, w_k)
            out[band] = fused.reshape(o[band].shape)
    else:
        size = o.shape[1] // k
        for i in range(k):
            band = slice(i * size, (i + 1) * size)
            fused = reference_block(o[:, band].reshape(-1, channels), s[:, band].reshape(-1, channels), w_q, w_k)
            out[:, band] = fused.reshape(o[:, band].shape)
    return out


def test_single_block_covers_the_whole_map(rng):
    fm = rng.normal(size=(4, 4, 2))
    blocks = area_partition(fm, AreaConfig(k=1))
    assert len(blocks) == 1
    np.testing.assert_array_equal(blocks[0], fm)


def test_horizontal_and_vertical_bands(rng):
    fm = rng.normal(size=(4, 4, 2))
    rows = area_partition(fm, AreaConfig(k=2, axis="horizontal"))
    cols = area_partition(fm, AreaConfig(k=2, axis="vertical"))
    np.testing.assert_array_equal(rows[1], fm[2:])
    np.testing.assert_array_equal(cols[0], fm[:, :2])


@pytest.mark.parametrize("axis", ["horizontal", "vertical"])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_merge_inverts_partition_with_padding(axis, k, rng):
    fm = rng.normal(size=(5, 7, 3))
    cfg = AreaConfig(k=k, axis=axis)
    blocks = area_partition(fm, cfg)
    assert len(blocks) == k
    length = fm.shape[cfg.grid_axis]
    np.testing.assert_array_equal(area_merge(blocks, cfg, length), fm)


def test_empty_map_cannot_be_partitioned():
    with pytest.raises(ContractError):
        area_partition(np.zeros((0, 4, 2)), AreaConfig(k=2))


@pytest.mark.parametrize("kwargs", [{"k": 0}, {"head_dim": 0}, {"axis": "diagonal"}])
def test_area_config_validation(kwargs):
    with pytest.raises(InputError):
        AreaConfig(**kwargs)


def test_constant_maps_pass_through(rng):
    fm = np.full((4, 4, 3), 0.7)
    out = afm_fuse(fm, fm, AFMParams.create(3, 4, rng), AreaConfig(k=2))
    np.testing.assert_allclose(out.data, fm, atol=1e-12)


def test_single_block_equals_global_attention(rng):
    o, s = rng.normal(size=(2, 4, 4, 3))
    params = AFMParams.create(3, 4, rng)
    out = afm_fuse(o, s, params, AreaConfig(k=1, head_dim=4))
    expected = reference_block(o.reshape(16, 3), s.reshape(16, 3), params.w_q.data, params.w_k.data)
    np.testing.assert_allclose(out.data, expected.reshape(4, 4, 3), atol=1e-10)


@pytest.mark.parametrize("axis", ["horizontal", "vertical"])
def test_banded_fusion_matches_per_block_reference(axis, rng):
    o, s = rng.normal(size=(2, 4, 4, 3))
    params = AFMParams.create(3, 4, rng)
    out = afm_fuse(o, s, params, AreaConfig(k=2, axis=axis, head_dim=4))
    np.testing.assert_allclose(out.data, reference_fuse(o, s, params, 2, axis), atol=1e-10)


def test_blocks_do_not_see_each_other(rng):
    o, s = rng.normal(size=(2, 4, 4, 2))
    params = AFMParams.create(2, 4, rng)
    cfg = AreaConfig(k=2)
    before = afm_fuse(o, s, params, cfg).data
    s[:2] += 5.0
    after = afm_fuse(o, s, params, cfg).data
    np.testing.assert_array_equal(after[2:], before[2:])
    assert not np.allclose(after[:2], before[:2])


def test_attention_rows_sum_to_one(rng):
    params = AFMParams.create(3, 4, rng)
    w = attention_weights(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), params).data
    np.testing.assert_allclose(w.sum(axis=-1), np.ones(5))


def test_padded_maps_keep_their_shape(rng):
    o, s = rng.normal(size=(2, 5, 4, 2))
    out = afm_fuse(FeatureMap(o, 4), FeatureMap(s, 4), AFMParams.create(2, 4, rng), AreaConfig(k=2))
    assert isinstance(out, FeatureMap) and out.level == 4
    assert out.data.shape == (5, 4, 2)


def test_cost_falls_as_blocks_shrink(rng):
    o, s = rng.normal(size=(2, 32, 32, 4))
    params = AFMParams.create(4, 8, rng)
    costs = []
    for k in (1, 2, 4, 8):
        counter = FlopCounter()
        afm_fuse(o, s, params, AreaConfig(k=k), counter)
        costs.append(counter.count)
    assert costs == sorted(costs, reverse=True)
    assert len(set(costs)) == 4


def test_shape_and_channel_mismatch(rng):
    params = AFMParams.create(2, 4, rng)
    with pytest.raises(ContractError):
        afm_fuse(np.zeros((4, 4, 2)), np.zeros((4, 2, 2)), params, AreaConfig(k=2))
    with pytest.raises(ContractError):
        afm_fuse(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)), params, AreaConfig(k=2))


def test_projection_gradients(rng):
    for _ in range(20):
        o, s = rng.normal(size=(2, 4, 4, 2))
        weights = rng.normal(size=(4, 4, 2))
        axis = "horizontal" if rng.uniform() < 0.5 else "vertical"
        op = lambda p: (afm_fuse(o, s, AFMParams(p["w_q"], p["w_k"]), AreaConfig(k=2, axis=axis)) * weights).sum()  # noqa: E731
        inputs = {"w_q": rng.normal(size=(2, 3)), "w_k": rng.normal(size=(2, 3))}
        assert finite_diff_check(op, inputs, atol=1e-9) < 1e-4
