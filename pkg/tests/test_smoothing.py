import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from trajattack import SmootherSpec
from trajattack.smoothing import DEFAULT_KERNEL

from conftest import straight_positions


def test_kernel_validation():
    with pytest.raises(ValueError, match="odd"):
        SmootherSpec(kernel=(0.5, 0.5))
    with pytest.raises(ValueError, match="odd"):
        SmootherSpec(kernel=(1.0,))
    with pytest.raises(ValueError, match="sum to 1"):
        SmootherSpec(kernel=(0.5, 0.5, 0.5))
    assert SmootherSpec().kernel == DEFAULT_KERNEL
    assert SmootherSpec().half == 1


def test_spike_is_averaged():
    # x = 0, 3, 0 -> the middle point becomes the window mean 1
    pts = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 0.0]])
    out = SmootherSpec().apply(pts)
    assert_allclose(out[1], [1.0, 0.0])
    # endpoints exactly preserved
    assert_array_equal(out[0], pts[0])
    assert_array_equal(out[2], pts[2])


def test_constant_trajectory_unchanged_exactly():
    pts = np.tile([2.5, -1.5], (8, 1))
    out = SmootherSpec().apply(pts)
    assert_array_equal(out, pts)


def test_straight_uniform_motion_is_a_fixed_point():
    # equally spaced collinear points: the two difference terms cancel
    pts = straight_positions(10, speed=7.0, f=2.0, direction=(3.0, 4.0))
    out = SmootherSpec().apply(pts)
    assert_array_equal(out, pts)


def test_matrix_agrees_with_apply():
    rng = np.random.default_rng(0)
    for kernel in [DEFAULT_KERNEL, (0.25, 0.5, 0.25), (0.1, 0.2, 0.4, 0.2, 0.1)]:
        spec = SmootherSpec(kernel=kernel)
        for n in (5, 6, 9):
            pts = rng.normal(0.0, 3.0, size=(n, 2))
            assert_allclose(spec.matrix(n) @ pts, spec.apply(pts), atol=1e-12)


def test_matrix_rows_sum_to_one():
    m = SmootherSpec().matrix(7)
    assert_allclose(m.sum(axis=1), np.ones(7), atol=1e-12)
    # boundary rows are identity
    assert_array_equal(m[0], np.eye(7)[0])
    assert_array_equal(m[-1], np.eye(7)[-1])


def test_short_input_passes_through():
    spec = SmootherSpec(kernel=(0.2, 0.2, 0.2, 0.2, 0.2))
    pts = np.array([[0.0, 0.0], [5.0, 5.0], [1.0, 2.0]])
    # 3 points < kernel length 5: nothing to smooth
    assert_array_equal(spec.apply(pts), pts)


def test_apply_smooths_noise_toward_line():
    rng = np.random.default_rng(1)
    base = straight_positions(20, speed=5.0, f=2.0)
    noisy = base + rng.normal(0.0, 0.3, size=base.shape)
    out = SmootherSpec().apply(noisy)
    # strictly closer to the underlying line in mean square
    assert np.mean((out - base) ** 2) < np.mean((noisy - base) ** 2)
