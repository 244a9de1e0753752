import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbrefine.evaluation import (
    PRStats,
    asymmetry_stats,
    boundary_f1,
    epe,
    epe_vs_distance,
    error_decomposition,
    replacement_report,
    side_epe_pairs,
)
from mbrefine.synth import SynthSceneSpec, synth_scene
from oracles import distance_brute


def _flow(seed, shape=(12, 14)):
    return np.random.default_rng(seed).normal(size=shape + (2,))


# -- EPE ---------------------------------------------------------------------

def test_epe_basics():
    gt = _flow(0)
    assert epe(gt, gt)[0] == 0.0
    assert epe(gt + np.array([3.0, 4.0]), gt)[0] == pytest.approx(5.0, abs=1e-12)


def test_epe_respects_validity_and_mask():
    gt = np.zeros((2, 2, 2))
    est = gt.copy()
    est[0, 0] = (6.0, 8.0)
    valid = np.array([[True, True], [False, False]])
    assert epe(est, gt, valid)[0] == 5.0
    mask = np.array([[False, True], [True, True]])
    assert epe(est, gt, valid, mask)[0] == 0.0
    with pytest.raises(ValueError):
        epe(est, gt, np.zeros((2, 2), dtype=bool))


# -- boundary F1 -------------------------------------------------------------

def test_prstats_conventions():
    zero = PRStats.from_counts(0, 0, 0)
    assert (zero.precision, zero.recall, zero.f1) == (0.0, 0.0, 0.0)
    s = PRStats.from_counts(3, 1, 2)
    assert s.precision == 0.75 and s.recall == 0.6 and s.tp_gt == 3
    assert s.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)
    t = PRStats.from_counts(3, 1, 2, tp_gt=8)
    assert t.recall == 0.8


def test_f1_identical_and_empty():
    gt = np.zeros((20, 20), dtype=bool)
    gt[5, 3:15] = True
    assert boundary_f1(gt, gt).f1 == 1.0
    empty = boundary_f1(np.zeros_like(gt), gt)
    assert empty.f1 == 0.0 and empty.fn == gt.sum()


def test_f1_one_pixel_shift_on_256_frame():
    gt = np.zeros((256, 256), dtype=bool)
    gt[:, 100] = True
    pred = np.roll(gt, 1, axis=1)
    assert 0.0075 * math.hypot(256, 256) == pytest.approx(2.715, abs=1e-3)
    assert boundary_f1(pred, gt).f1 == 1.0
    assert boundary_f1(np.roll(gt, 3, axis=1), gt).f1 == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_f1_matches_brute_force_and_swaps(seed):
    rng = np.random.default_rng(seed)
    pred = rng.random((16, 16)) < 0.1
    gt = rng.random((16, 16)) < 0.1
    rel = rng.uniform(0.01, 0.2)
    radius = rel * math.hypot(16, 16)
    tp = int(np.count_nonzero(pred & (distance_brute(gt) <= radius)))
    fn = int(np.count_nonzero(gt & (distance_brute(pred) > radius)))
    s = boundary_f1(pred, gt, rel)
    assert (s.tp, s.fp, s.fn, s.tp_gt) == (tp, int(pred.sum()) - tp, fn, int(gt.sum()) - fn)
    t = boundary_f1(gt, pred, rel)
    assert (t.precision, t.recall) == (s.recall, s.precision)


# -- EPE against distance ----------------------------------------------------

def test_distance_curve_flat_for_uniform_error():
    gt = _flow(1)
    mb = np.zeros(gt.shape[:2], dtype=bool)
    mb[6, :] = True
    curve = epe_vs_distance(gt + np.array([0.0, 2.0]), gt, mb, max_dist=8)
    assert len(curve) == 9
    means = [b.mean_epe for b in curve if b.count]
    np.testing.assert_allclose(means, 2.0, atol=1e-12)


def test_distance_curve_empty_boundary_uses_overflow_bin():
    gt = _flow(2)
    curve = epe_vs_distance(gt, gt, np.zeros(gt.shape[:2], dtype=bool), max_dist=5)
    assert [b.count for b in curve] == [0, 0, 0, 0, 0, gt.shape[0] * gt.shape[1]]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_distance_curve_weighted_mean_is_global_mean(seed):
    rng = np.random.default_rng(seed)
    gt, est = rng.normal(size=(2, 20, 20, 2))
    mb = rng.random((20, 20)) < 0.02
    curve = epe_vs_distance(est, gt, mb, max_dist=6)
    total = sum(b.mean_epe * b.count for b in curve if b.count) / sum(b.count for b in curve)
    assert total == pytest.approx(epe(est, gt)[0], abs=1e-9)


def test_distance_curve_on_blurred_synth():
    s = synth_scene(SynthSceneSpec(corruption_band=0))
    curve = epe_vs_distance(s.flow_est, s.flow_gt, s.boundary_gt)
    assert curve[1].mean_epe > curve[10].mean_epe


# -- error decomposition -----------------------------------------------------

def test_decomposition_with_perfect_estimate():
    s = synth_scene(SynthSceneSpec())
    entries = error_decomposition(s.flow_gt, s.flow_gt, s.boundary_gt)
    assert len(entries) == 21
    for e in entries:
        assert e.count > 0
        assert e.e == 0.0
        assert e.r == e.a


def test_decomposition_with_constant_truth():
    gt = np.broadcast_to([1.0, -2.0], (30, 30, 2)).copy()
    est = gt + _flow(3, (30, 30))
    mb = np.zeros((30, 30), dtype=bool)
    mb[15, 5:25] = True
    for e in error_decomposition(est, gt, mb, c_max=8):
        if e.count:
            assert e.a == 0.0 and e.r == e.e


def test_decomposition_shapes_on_synth():
    s = synth_scene(SynthSceneSpec())
    entries = error_decomposition(s.flow_est, s.flow_gt, s.boundary_gt)
    e = np.array([x.e for x in entries])
    a = np.array([x.a for x in entries])
    assert np.all(np.diff(a) >= -1e-12)
    assert np.all(np.diff(e) <= 1e-12)
    assert e[0] > 1.0 and np.ptp(e[10:]) < 1e-3
    assert all(x.count > 0 for x in entries)


def test_decomposition_segment_rule():
    # Two parallel boundaries 6 px apart: offsets past the midline are cut.
    gt = np.zeros((20, 40, 2))
    mb = np.zeros((20, 40), dtype=bool)
    mb[:, 10] = mb[:, 16] = True
    entries = error_decomposition(gt, gt, mb, c_max=6)
    counts = [e.count for e in entries]
    assert counts[0] > 0 and counts[-1] < counts[0]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


# -- side pairs --------------------------------------------------------------

def test_side_pairs_perfect_estimate():
    s = synth_scene(SynthSceneSpec())
    pairs = side_epe_pairs(s.flow_gt, s.flow_gt, s.boundary_gt, s.frame2)
    assert len(pairs) > 0
    np.testing.assert_array_equal(pairs[:, 2:], 0.0)


def test_side_pairs_order_and_asymmetry():
    s = synth_scene(SynthSceneSpec())
    pairs = side_epe_pairs(s.flow_est, s.flow_gt, s.boundary_gt, s.frame2)
    assert np.all(pairs[:, 2] <= pairs[:, 3])
    assert asymmetry_stats(pairs)["one_sided"] > 0


def test_asymmetry_stats_counts():
    pairs = np.array([[0, 0, 0.5, 7.0], [0, 0, 0.2, 0.9], [0, 0, 2.0, 3.0], [0, 0, 0.1, 2.0]])
    stats = asymmetry_stats(pairs)
    assert stats == {"n": 4, "one_sided": 0.5, "large_given_one_sided": 0.5}
    assert asymmetry_stats(np.zeros((0, 4)))["n"] == 0


# -- replacement report ------------------------------------------------------

def test_replacement_report():
    gt = np.zeros((3, 3, 2))
    init = gt.copy()
    init[1, 1] = (3.0, 4.0)
    init[0, 0] = (1.0, 0.0)
    refined = init.copy()
    refined[1, 1] = (0.0, 1.0)
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 1] = True
    rep = replacement_report(init, refined, gt, mask)
    assert rep == {"n_replaced": 1, "init_aepe": 5.0, "refined_aepe": 1.0, "reduction_pct": 80.0}
    assert math.isnan(replacement_report(init, refined, gt, ~np.ones((3, 3), bool))["init_aepe"])
