"""Graph-level backward properties: accumulation, identities, guard rails."""

import numpy as np
import pytest

from tokse.grad import Tensor, grad_check, no_grad, ops


def test_sum_of_squares_gradient_exact():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_array_equal(x.grad, 2 * x.data)


def test_fanout_accumulates():
    x = Tensor(np.array([3.0, -1.0]), requires_grad=True)
    # x feeds two separate product nodes; contributions must sum.
    y = (x * x).sum()
    y.backward()
    np.testing.assert_allclose(x.grad, 2 * x.data, atol=1e-15)

    x.zero_grad()
    (x + x).sum().backward()
    np.testing.assert_array_equal(x.grad, np.full(2, 2.0))


def test_diamond_graph_single_accumulation_per_leaf():
    x = Tensor(np.array([2.0]), requires_grad=True)
    a = x * 3.0
    b = x * 5.0
    (a * b).sum().backward()  # d/dx 15x^2 = 30x
    np.testing.assert_allclose(x.grad, np.array([60.0]), atol=1e-12)


def test_softmax_cross_entropy_onehot_identity():
    rng = np.random.default_rng(2)
    logits = Tensor(rng.standard_normal((1, 9)), requires_grad=True)
    target = np.array([4])
    ops.cross_entropy(logits, target).backward()
    p = ops.softmax(Tensor(logits.data)).data
    onehot = np.zeros((1, 9))
    onehot[0, 4] = 1.0
    assert np.max(np.abs(logits.grad - (p - onehot))) < 1e-10


def test_masked_positions_get_zero_gradient():
    rng = np.random.default_rng(3)
    logits = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    targets = rng.integers(0, 4, 5)
    mask = np.array([True, False, True, False, True])
    ops.cross_entropy(logits, targets, mask).backward()
    np.testing.assert_array_equal(logits.grad[~mask], 0.0)
    assert np.all(np.abs(logits.grad[mask]).sum(axis=1) > 0)


def test_backward_requires_scalar():
    x = Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * 2.0).backward()


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * 2.0).sum()
    assert not y.requires_grad and y._parents == ()


def test_grad_check_linear_and_quadratic():
    x = Tensor(np.array([0.3, -0.7, 1.1]), requires_grad=True)
    w = Tensor(np.array([2.0, -1.0, 0.5]))
    assert grad_check(lambda: (x * w).sum(), [x]) <= 1e-10
    assert grad_check(lambda: (x * x).sum(), [x], eps=1e-5) <= 1e-9


def test_constants_collect_no_gradient():
    x = Tensor(np.ones(4), requires_grad=True)
    c = Tensor(np.full(4, 2.0))
    (x * c).sum().backward()
    assert c.grad is None
    np.testing.assert_array_equal(x.grad, c.data)


def test_forward_values_finite_on_finite_inputs():
    rng = np.random.default_rng(11)
    x = Tensor(rng.standard_normal((4, 32)) * 50)
    checks = [
        ops.softmax(x), ops.elu(x), ops.gelu(x), ops.tanh(x),
        ops.layer_norm(x, Tensor(np.ones(32)), Tensor(np.zeros(32))),
        ops.sqrt(ops.abs_(x) + 1e-9),
    ]
    for t in checks:
        assert np.all(np.isfinite(t.data))
