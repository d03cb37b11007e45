import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from sess.metrics import (
    EmptyGroundTruthError,
    PRCurve,
    e_measure,
    enhanced_alignment,
    evaluate_all,
    f_measure,
    mae,
    max_f,
    pr_curve,
    s_measure,
    weighted_f,
)

square = np.zeros((20, 20), bool)
square[6:14, 6:14] = True

byte_maps = arrays(np.int64, (6, 6), elements=st.integers(0, 255)).map(lambda a: a / 255.0)
masks = arrays(np.bool_, (6, 6)).filter(lambda g: g.any())


def test_mae_examples():
    assert mae(square.astype(float), square) == 0
    assert mae(np.ones((3, 3)), np.zeros((3, 3), bool)) == 1
    assert mae(np.full((20, 20), 0.5), square) == 0.5


def test_pr_curve_examples():
    c = pr_curve(square.astype(float), square)
    assert (c.precision[1:] == 1).all() and (c.recall[1:] == 1).all()
    zero = pr_curve(np.zeros((20, 20)), square)
    assert zero.recall[0] == 1 and zero.precision[0] == square.mean()
    assert zero.precision[1] == 1.0 and zero.recall[1] == 0.0  # empty prediction
    with pytest.raises(EmptyGroundTruthError):
        pr_curve(np.zeros((3, 3)), np.zeros((3, 3), bool))


def test_max_f_examples():
    taus = np.arange(256)
    assert max_f(PRCurve(taus, np.full(256, 0.5), np.full(256, 0.5))) == pytest.approx(0.5)
    assert max_f(PRCurve(taus, np.ones(256), np.full(256, 0.5))) == pytest.approx(0.8125)
    assert f_measure(0.0, 0.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(byte_maps, masks)
def test_pr_matches_counting_oracle(s, g):
    c = pr_curve(s, g)
    p, r = oracles.pr_oracle(s, g)
    assert np.array_equal(c.precision, p) and np.array_equal(c.recall, r)
    assert (np.diff(c.recall) <= 0).all()


@settings(max_examples=25, deadline=None)
@given(byte_maps, masks)
def test_weighted_f_matches_oracle(s, g):
    assert weighted_f(s, g) == pytest.approx(oracles.weighted_f_oracle(s, g), abs=1e-12)


def test_weighted_f_examples():
    assert weighted_f(square.astype(float), square) == 1.0
    assert weighted_f(1.0 - square, square) == 0.0
    rng = np.random.default_rng(0)
    s = rng.random((5, 5))
    g = rng.random((5, 5)) < 0.5
    assert weighted_f(s, g) == pytest.approx(oracles.weighted_f_oracle(s, g), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(byte_maps, arrays(np.bool_, (6, 6)))
def test_e_measure_matches_oracle(s, g):
    assert e_measure(s, g) == pytest.approx(oracles.e_measure_oracle(s, g), abs=1e-12)


def test_e_measure_examples():
    assert enhanced_alignment(square, square) == 1.0
    assert enhanced_alignment(~square, square) == 0.0
    e = e_measure(square.astype(float), square)
    assert 1 - 1 / 256 <= e <= 1


def test_s_measure_examples():
    assert s_measure(square.astype(float), square) == 1.0
    assert s_measure(1.0 - square, square) <= 0.1
    empty = np.zeros((20, 20), bool)
    assert s_measure(np.zeros((20, 20)), empty) == 1.0
    assert s_measure(np.ones((20, 20)), ~empty) == 1.0


def test_evaluate_all_extremes():
    r = evaluate_all(square.astype(float), square)
    assert (r.mae, r.max_f, r.weighted_f, r.s_measure) == (0, 1, 1, 1)
    assert r.e_measure == pytest.approx(1, abs=1 / 256)
    bad = evaluate_all(1.0 - square, square)
    assert bad.mae == 1 and bad.weighted_f == 0 and bad.s_measure < 0.1 and bad.e_measure < 0.01


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (9, 11), elements=st.floats(0, 1)), arrays(np.bool_, (9, 11)).filter(lambda g: g.any()))
def test_ranges_flip_invariance_and_complement(s, g):
    r = evaluate_all(s, g)
    for v in r.as_dict().values():
        assert np.isfinite(v) and 0 <= v <= 1
    flipped = evaluate_all(s[:, ::-1], g[:, ::-1])
    # the S-measure quadrant split keeps the centroid column on the left, so it is not mirror-symmetric
    for k in ("mae", "max_f", "weighted_f", "e_measure"):
        assert getattr(flipped, k) == pytest.approx(getattr(r, k), abs=1e-12), k
    assert mae(s, g) + mae(1 - s, g) == pytest.approx(1.0)


def test_shape_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        mae(np.zeros((3, 3)), np.zeros((3, 4), bool))
