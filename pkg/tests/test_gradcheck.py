import numpy as np
import pytest

from googlenet import autograd as ag
from googlenet.gradcheck import grad_check, relu_kink_mask


def projection(rng, shape):
    return rng.standard_normal(shape)


def test_linear_is_exact_to_roundoff(rng):
    x = rng.standard_normal((2, 6))
    w = rng.standard_normal((4, 6))
    b = rng.standard_normal(4)
    coeff = projection(rng, (2, 4))

    def fn(tape, xv, wv, bv):
        return ag.weighted_sum(tape, ag.linear(tape, xv, wv, bv), coeff)

    assert grad_check(fn, [x, w, b], eps=1e-4) < 1e-7


def test_conv3x3_small(rng):
    x = rng.standard_normal((1, 2, 5, 5))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    coeff = projection(rng, (1, 3, 5, 5))

    def fn(tape, xv, wv, bv):
        return ag.weighted_sum(tape, ag.conv2d(tape, xv, wv, bv, stride=1, pad=1), coeff)

    assert grad_check(fn, [x, w, b], eps=1e-4) < 1e-6


def test_relu_kink_coordinate_excluded(rng):
    x = rng.standard_normal(5)
    x[2] = 0.0  # sits exactly on the kink
    coeff = np.ones(5)

    def fn(tape, xv):
        return ag.weighted_sum(tape, ag.relu(tape, xv), coeff)

    mask = relu_kink_mask(x)
    assert mask[2] and mask.sum() == 1
    assert grad_check(fn, [x], eps=1e-4, exclude=[mask]) < 1e-9
    # without the exclusion the kink coordinate dominates the error
    assert grad_check(fn, [x], eps=1e-4) > 0.4


def test_nonfinite_loss_raises(rng):
    def fn(tape, xv):
        bad = ag.Var(xv.data / 0.0)
        return ag.weighted_sum(tape, bad, np.ones(3))

    with pytest.raises(FloatingPointError):
        with np.errstate(divide="ignore", invalid="ignore"):
            grad_check(fn, [np.ones(3)])


def test_avgpool_gradcheck(rng):
    x = rng.standard_normal((1, 2, 6, 6))
    coeff = projection(rng, (1, 2, 3, 3))

    def fn(tape, xv):
        return ag.weighted_sum(tape, ag.pool2d(tape, xv, "avg", 3, 2, pad=1), coeff)

    assert grad_check(fn, [x], eps=1e-4) < 1e-8
