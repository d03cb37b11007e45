import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
import scenes
from sess import rgb_to_lab
from sess.config import SessConfig
from sess.fusion import (
    CaConfig,
    MapStack,
    ca_logits,
    final_color_pass,
    final_pass_count,
    integrate,
    merge_final,
    reintroduce_deep,
    run_sess,
    sess,
    suppress_low,
)
from sess.raster import otsu_threshold
from sess.saliency import SemConfig
from sess.superpixel import SeedSet, Segmentation, SuperpixelParams

unit_maps = arrays(np.float64, (5, 6), elements=st.floats(0, 1))


def test_stack_validation():
    with pytest.raises(ValueError):
        MapStack([])
    with pytest.raises(ValueError, match="dimension mismatch"):
        MapStack([np.zeros((3, 3)), np.zeros((3, 4))])
    stack = MapStack([np.array([[0.0, 1.0]]), np.full((1, 2), 0.4)])
    assert len(stack) == 2 and stack.thresholds.tolist() == [1 / 255, 102 / 255]


def test_ca_config_validation():
    for bad in (dict(lam=-1), dict(steps=-1), dict(epsilon=0.5), dict(epsilon=0)):
        with pytest.raises(ValueError):
            CaConfig(**bad)


@settings(max_examples=30, deadline=None)
@given(st.lists(unit_maps, min_size=1, max_size=4))
def test_zero_rate_is_clamped_mean(layers):
    out = integrate(MapStack(layers), CaConfig(lam=0.0))
    assert np.allclose(out, np.mean(np.clip(layers, 1e-3, 1 - 1e-3), axis=0), rtol=0, atol=1e-9)


def test_uniform_positive_votes_raise_everything():
    rng = np.random.default_rng(0)
    layer = 0.6 + 0.3 * rng.random((6, 6))
    stack = MapStack([layer])
    stack.thresholds[:] = 0.0  # every cell votes +1
    out = integrate(stack, CaConfig(lam=0.01, steps=3))
    assert (out > layer).all()
    # interior cells have 4 neighbours: log-odds rise by 3 * 4 * lam
    logit = np.log(layer / (1 - layer))
    assert np.allclose(out[1:-1, 1:-1], 1 / (1 + np.exp(-(logit + 0.12)))[1:-1, 1:-1])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.sampled_from([1e-4, 0.05, 0.5]), st.integers(0, 3))
def test_ca_matches_direct_simulation(seed, nz, lam, steps):
    rng = np.random.default_rng(seed)
    layers = rng.random((nz, 8, 8))
    stack = MapStack(list(layers))
    got = ca_logits(stack, CaConfig(lam=lam, steps=steps))
    assert np.array_equal(got, oracles.ca_oracle(layers, stack.thresholds, lam, steps, 1e-3))


def test_identical_layers_agree_with_simulation():
    layer = np.random.default_rng(8).random((8, 8))
    stack = MapStack([layer, layer])
    got = ca_logits(stack, CaConfig(lam=0.02, steps=3))
    assert np.array_equal(got[0], got[1])
    assert np.array_equal(got, oracles.ca_oracle(np.stack([layer, layer]), stack.thresholds, 0.02, 3, 1e-3))


def test_cell_on_threshold_votes_positive():
    # value exactly at the layer's Otsu level must count as "at or above"
    layer = np.array([[0.0, 0.0, 0.0, 0.2, 0.2, 0.2]])
    stack = MapStack([layer])
    assert stack.thresholds[0] <= 0.2
    logits = ca_logits(stack, CaConfig(lam=0.1, steps=1))
    start = np.log(np.clip(layer, 1e-3, 1) / (1 - np.clip(layer, 1e-3, 1)))
    # cell 4 has neighbours 3 and 5, both at 0.2 >= t
    assert logits[0, 0, 4] == pytest.approx(start[0, 4] + 0.2)


def _toy_seg(labels):
    k = labels.max()
    return Segmentation.from_labels(labels, np.zeros(labels.shape + (3,)), np.zeros(labels.shape), SeedSet(np.zeros((k, 2), np.int64), np.zeros(k, bool)))


def test_reintroduce_deep_examples():
    labels = np.array([[1, 1, 2, 2]])
    seg = _toy_seg(labels)
    assert np.allclose(reintroduce_deep(np.full((1, 4), 0.7), seg), 0.7)
    assert reintroduce_deep(np.array([[1.0, 0.0, 1.0, 1.0]]), seg).tolist() == [[0.5, 0.5, 1.0, 1.0]]
    aligned = np.array([[0.0, 0.0, 1.0, 1.0]])
    assert np.array_equal(reintroduce_deep(aligned, seg), aligned)


@settings(max_examples=30)
@given(unit_maps, unit_maps, unit_maps)
def test_merge_is_a_lattice_join(a, b, c):
    assert np.array_equal(merge_final(a, b), merge_final(b, a))
    assert np.array_equal(merge_final(merge_final(a, b), c), merge_final(a, merge_final(b, c)))
    assert np.array_equal(merge_final(a, a), a)
    assert np.array_equal(merge_final(a, np.zeros_like(a)), a)


def test_merge_shape_check():
    with pytest.raises(ValueError):
        merge_final(np.zeros((2, 2)), np.zeros((2, 3)))


@settings(max_examples=50)
@given(unit_maps)
def test_suppress_low_properties(m):
    out = suppress_low(m)
    half = otsu_threshold(m) / 2
    assert (out <= m).all()
    assert np.array_equal(out[m >= half], m[m >= half])
    assert (out[m < half] == 0).all()


def test_suppress_low_examples():
    binary = np.array([[0.0, 1.0, 1.0, 0.0]])
    assert np.array_equal(suppress_low(binary), binary)
    m = np.array([[0.01] * 4 + [0.4] * 4 + [1.0] * 4])
    assert otsu_threshold(m) == 103 / 255
    assert suppress_low(m).tolist() == [[0.0] * 4 + [0.4] * 4 + [1.0] * 4]
    const = np.full((3, 3), 0.3)
    assert np.array_equal(suppress_low(const), const)


def test_final_pass_count():
    cfg = SemConfig(iterations=3, superpixels=2500)
    assert final_pass_count(cfg, False) == 2500
    assert final_pass_count(cfg, True) == 1280


def test_final_color_pass_constant_passthrough():
    lab = np.random.default_rng(1).random((16, 16, 3))
    flat = np.full((16, 16), 0.5)
    cfg = SemConfig(superpixels=20, superpixel_params=SuperpixelParams(iters=1))
    sc, seg = final_color_pass(lab, flat, cfg)
    assert sc is flat and seg.n_superpixels == 20


def test_final_color_pass_highlights_same_color():
    from scipy.ndimage import gaussian_filter

    rgb, s0, a, b = scenes.two_disks()
    # a graded map like a real integrated map; a two-level map puts psi right above its lower level
    graded = gaussian_filter(s0, 2.0)
    cfg = SemConfig(superpixels=400, superpixel_params=SuperpixelParams(iters=2))
    sc, seg = final_color_pass(rgb_to_lab(rgb), graded, cfg)
    assert seg.n_superpixels == 400
    assert sc[b].mean() > 0.8 and sc[~(a | b)].mean() < 0.1


def test_unique_object_not_regressed():
    d = scenes.disk((128, 128), (64, 64), 30)
    rgb = scenes.paint([(d, scenes.OBJECT)], (128, 128))
    out = sess(rgb_to_lab(rgb), d.astype(float), SessConfig(iterations=3, superpixels=300, oisf_iters=2))
    assert out.min() >= 0 and out.max() <= 1
    assert (out[d] >= otsu_threshold(out)).mean() > 0.95


def test_run_sess_shape_mismatch_and_determinism():
    rgb, s0, a, b = scenes.two_disks((64, 64))
    lab = rgb_to_lab(rgb)
    with pytest.raises(ValueError, match="dimension mismatch"):
        run_sess(lab, s0[:10])
    cfg = SessConfig(iterations=2, superpixels=60, oisf_iters=1)
    r1 = run_sess(lab, s0, cfg)
    r2 = run_sess(lab, s0, cfg)
    assert np.array_equal(r1.output, r2.output)
    assert len(r1.iterations) == 2 and r1.deep is not None
    assert run_sess(lab, s0, cfg.replace(no_deep_reintro=True)).deep is None
