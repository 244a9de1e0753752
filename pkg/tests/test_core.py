import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mbrefine.core import (
    ShapeMismatchError,
    as_image,
    bilinear_sample,
    brightness_gradient,
    check_same_grid,
    distance_transform,
    grow_from_seeds,
    luminance,
)
from oracles import distance_brute


def test_bilinear_integer_coordinates_are_exact():
    rng = np.random.default_rng(1)
    field = rng.normal(size=(5, 7, 2))
    yy, xx = np.mgrid[0:5, 0:7]
    np.testing.assert_array_equal(bilinear_sample(field, xx, yy), field)


def test_bilinear_midpoint_and_block_centre():
    assert bilinear_sample(np.array([[0.0, 4.0]]), 0.5, 0.0) == 2.0
    block = np.array([[0.0, 2.0], [4.0, 6.0]])
    assert bilinear_sample(block, 0.5, 0.5) == 3.0


def test_bilinear_clamps_to_border():
    field = np.arange(12, dtype=float).reshape(3, 4)
    assert bilinear_sample(field, -5.0, -2.0) == field[0, 0]
    assert bilinear_sample(field, 10.0, 1.0) == field[1, 3]
    assert bilinear_sample(field, 1.5, 9.0) == pytest.approx(0.5 * (field[2, 1] + field[2, 2]))


def test_bilinear_rejects_non_finite():
    with pytest.raises(ValueError):
        bilinear_sample(np.zeros((3, 3)), np.nan, 0.0)
    with pytest.raises(ValueError):
        bilinear_sample(np.zeros((3, 3)), 0.0, np.inf)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0, 1), s=st.floats(0, 1))
def test_bilinear_is_linear_along_each_axis(seed, t, s):
    rng = np.random.default_rng(seed)
    field = rng.normal(size=(6, 6))
    i, j = rng.integers(0, 5, size=2)
    along_x = bilinear_sample(field, j + t, float(i))
    assert along_x == pytest.approx((1 - t) * field[i, j] + t * field[i, j + 1], abs=1e-12)
    along_y = bilinear_sample(field, float(j), i + s)
    assert along_y == pytest.approx((1 - s) * field[i, j] + s * field[i + 1, j], abs=1e-12)


def test_luminance_weights():
    img = np.zeros((1, 3, 3))
    img[0, 0, 0] = img[0, 1, 1] = img[0, 2, 2] = 1.0
    np.testing.assert_allclose(luminance(img)[0], [0.299, 0.587, 0.114])


def test_gradient_of_constant_is_zero():
    np.testing.assert_array_equal(brightness_gradient(np.full((6, 9), 0.3)), 0.0)


def test_gradient_of_ramp_points_along_x():
    w = 10
    ramp = np.tile(np.arange(w) / (w - 1), (8, 1))
    grad = brightness_gradient(ramp)[1:-1, 1:-1]
    np.testing.assert_allclose(grad[..., 1], 0.0, atol=1e-15)
    assert np.all(grad[..., 0] > 0)


def test_gradient_of_step_peaks_on_two_columns():
    img = np.zeros((8, 8))
    img[:, 4:] = 1.0
    mag = np.hypot(*np.moveaxis(brightness_gradient(img), -1, 0))
    # Sobel weights 1+2+1 over a normalisation of 8.
    np.testing.assert_allclose(mag[:, 3], 0.5)
    np.testing.assert_allclose(mag[:, 4], 0.5)
    others = np.delete(mag, [3, 4], axis=1)
    np.testing.assert_array_equal(others, 0.0)


def test_distance_examples():
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 0] = True
    dist = distance_transform(mask)
    assert dist[0, 0] == 0.0
    assert dist[2, 2] == pytest.approx(2 * math.sqrt(2))
    assert np.all(np.isinf(distance_transform(np.zeros((4, 5), dtype=bool))))


def test_distance_indices_for_empty_mask():
    dist, idx = distance_transform(np.zeros((2, 2), dtype=bool), return_indices=True)
    assert np.all(np.isinf(dist)) and np.all(idx == -1)


@settings(max_examples=60, deadline=None)
@given(arrays(bool, (16, 16), elements=st.booleans()))
def test_distance_matches_brute_force(mask):
    np.testing.assert_array_equal(distance_transform(mask), distance_brute(mask))


def test_grow_from_seeds_follows_diagonals_only_through_allowed():
    seeds = np.zeros((5, 5), dtype=bool)
    seeds[0, 0] = True
    allowed = np.eye(5, dtype=bool)
    allowed[4, 0] = True
    out = grow_from_seeds(seeds, allowed)
    np.testing.assert_array_equal(out, np.eye(5, dtype=bool))


def test_as_image_validation():
    assert as_image(np.zeros((2, 3))).shape == (2, 3, 1)
    with pytest.raises(ValueError):
        as_image(np.full((2, 2), 1.5))
    with pytest.raises(ValueError):
        as_image(np.zeros((2, 2, 2)))


def test_check_same_grid_names_both_inputs():
    with pytest.raises(ShapeMismatchError, match="flow has size 4x3 but frame is 5x3"):
        check_same_grid(("frame", np.zeros((3, 5))), ("flow", np.zeros((3, 4, 2))))
