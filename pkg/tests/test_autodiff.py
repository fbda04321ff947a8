import numpy as np
import pytest

from uanetlp import autodiff as ad
from uanetlp.autodiff import (AutodiffError, NonDeterministicError, NumericError,
                              ParamStore, ShapeError, Tape, Tensor, backward, grad_check)


def test_activation_fixed_points():
    tape = Tape()
    zero = tape.leaf(np.zeros((2, 2)))
    assert float(ad.sigmoid(zero).value[0, 0]) == 0.5
    assert float(ad.tanh(zero).value[0, 0]) == 0.0
    assert float(ad.elu(zero).value[0, 0]) == 0.0
    assert float(ad.relu(zero).value[0, 0]) == 0.0


def test_leaky_relu_negative_slope():
    tape = Tape()
    x = tape.leaf(np.array([[-1.0, 2.0]]))
    out = ad.leaky_relu(x, 0.2)
    np.testing.assert_allclose(out.value, [[-0.2, 2.0]])


def test_matmul_hand_case():
    # 2x3 @ 3x2, worked out by hand
    tape = Tape()
    a = tape.leaf([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    b = tape.leaf([[7.0, 8.0], [9.0, 10.0], [11.0, 12.0]])
    np.testing.assert_array_equal(ad.matmul(a, b).value, [[58.0, 64.0], [139.0, 154.0]])


def test_matmul_shape_mismatch():
    tape = Tape()
    a = tape.leaf(np.ones((2, 3)))
    b = tape.leaf(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        ad.matmul(a, b)


def test_masked_softmax_single_active_entry():
    tape = Tape()
    e = tape.leaf(np.array([[5.0, -3.0], [0.0, 7.0]]))
    mask = np.array([[True, False], [False, True]])
    out = ad.masked_row_softmax(e, mask)
    np.testing.assert_array_equal(out.value, [[1.0, 0.0], [0.0, 1.0]])


def test_masked_softmax_rows_sum_to_one():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        tape = Tape()
        e = tape.leaf(rng.normal(0, 5, size=(n, n)))
        mask = rng.random((n, n)) < 0.4
        np.fill_diagonal(mask, True)
        v = ad.masked_row_softmax(e, mask).value
        np.testing.assert_allclose(v.sum(axis=1), np.ones(n), atol=1e-12)
        assert (v[~mask] == 0.0).all()


def test_masked_softmax_empty_row_rejected():
    tape = Tape()
    e = tape.leaf(np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        ad.masked_row_softmax(e, np.array([[True, True], [False, False]]))


def test_backward_sum_gives_ones():
    tape = Tape()
    w = tape.leaf(np.arange(6.0).reshape(2, 3))
    backward(ad.sum_all(w))
    np.testing.assert_array_equal(w.grad, np.ones((2, 3)))


def test_backward_frobenius_gives_2w():
    tape = Tape()
    value = np.arange(6.0).reshape(2, 3) - 2.5
    w = tape.leaf(value)
    backward(ad.sum_all(ad.square(w)))
    np.testing.assert_allclose(w.grad, 2.0 * value)


def test_backward_twice_rejected():
    tape = Tape()
    w = tape.leaf(np.ones((2, 2)))
    loss = ad.sum_all(w)
    backward(loss)
    with pytest.raises(AutodiffError):
        backward(loss)


def test_backward_non_scalar_rejected():
    tape = Tape()
    w = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ShapeError):
        backward(ad.square(w))


def test_nan_detection_names_op():
    tape = Tape()
    big = tape.leaf(np.full((2, 2), 1e308))
    with pytest.raises(NumericError, match="mul"):
        ad.mul(big, big)


def test_bias_broadcast_gradient():
    tape = Tape()
    x = tape.leaf(np.arange(6.0).reshape(2, 3))
    b = tape.leaf(np.array([1.0, 2.0, 3.0]))
    backward(ad.sum_all(ad.square(ad.add(x, b))))
    manual = 2.0 * (x.value + b.value)
    np.testing.assert_allclose(x.grad, manual)
    np.testing.assert_allclose(b.grad, manual.sum(axis=0))


def test_weighted_row_sum_matches_matmul_and_keeps_weights_constant():
    rng = np.random.default_rng(0)
    pool = rng.random((4, 5))
    tape = Tape()
    x = tape.leaf(rng.normal(size=(5, 3)))
    out = ad.weighted_row_sum(pool, x)
    np.testing.assert_allclose(out.value, pool @ x.value)
    backward(ad.sum_all(out))
    np.testing.assert_allclose(x.grad, pool.T @ np.ones((4, 3)))


def test_slices_and_concat_roundtrip():
    rng = np.random.default_rng(1)
    tape = Tape()
    x = tape.leaf(rng.normal(size=(4, 6)))
    left = ad.col_slice(x, 0, 2)
    right = ad.col_slice(x, 2, 6)
    again = ad.concat_cols(left, right)
    np.testing.assert_array_equal(again.value, x.value)
    top = ad.row_slice(x, 0, 1)
    assert top.value.shape == (1, 6)


def test_forward_deterministic():
    def run():
        tape = Tape()
        x = tape.leaf(np.linspace(-2, 2, 12).reshape(3, 4))
        return ad.sum_all(ad.sigmoid(ad.matmul(x, ad.transpose(x)))).value

    assert float(run()) == float(run())


def _small_gat_loss(tape, binding):
    # composite layer exercising matmul, slices, broadcast add, leaky_relu,
    # masked softmax, elu, and reductions in one graph
    rng = np.random.default_rng(7)
    x = rng.normal(size=(5, 4))
    m = np.abs(rng.normal(size=(5, 5)))
    m = (m + m.T) / 2
    m[rng.random((5, 5)) < 0.4] = 0.0
    m = np.triu(m, 1) + np.triu(m, 1).T + np.eye(5)
    w, a = binding["W"], binding["a"]
    wx = ad.matmul(x, ad.transpose(w))
    src = ad.matmul(wx, ad.row_slice(a, 0, 3))
    dst = ad.matmul(wx, ad.row_slice(a, 3, 6))
    scores = ad.leaky_relu(ad.mul(m, ad.add(src, ad.transpose(dst))), 0.2)
    alpha = ad.masked_row_softmax(scores, m > 0)
    out = ad.elu(ad.matmul(alpha, wx))
    return ad.sum_all(ad.square(out))


def test_gat_layer_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    store = ParamStore()
    store.add("W", rng.normal(0, 0.5, size=(3, 4)))
    store.add("a", rng.normal(0, 0.5, size=(6, 1)))
    err = grad_check(_small_gat_loss, store, eps=1e-4, coords_per_param=8)
    assert err < 1e-4


def test_grad_check_linear_function_is_exact():
    store = ParamStore()
    store.add("w", np.array([[1.0, -2.0], [0.5, 3.0]]))
    coeff = np.array([[2.0, -1.0], [4.0, 0.5]])

    def linear(tape, binding):
        return ad.sum_all(ad.mul(coeff, binding["w"]))

    assert grad_check(linear, store, eps=1e-4) < 1e-8


def test_grad_check_flags_corrupted_backward_rule():
    store = ParamStore()
    store.add("w", np.array([[0.7, -1.2], [0.3, 2.0]]))

    def bad_square(t):
        # deliberately wrong derivative (3x instead of 2x)
        return Tensor(t.value ** 2, t.tape, (t,), lambda g: [g * 3.0 * t.value], "bad_square")

    def loss(tape, binding):
        return ad.sum_all(bad_square(binding["w"]))

    assert grad_check(loss, store, eps=1e-4) > 1e-2


def test_grad_check_detects_nondeterministic_forward():
    store = ParamStore()
    store.add("w", np.ones((2, 2)))
    counter = {"n": 0}

    def flaky(tape, binding):
        counter["n"] += 1
        return ad.sum_all(ad.mul(float(counter["n"]), binding["w"]))

    with pytest.raises(NonDeterministicError):
        grad_check(flaky, store)


def test_unused_parameters_get_zero_gradient():
    store = ParamStore()
    store.add("used", np.ones((2, 2)))
    store.add("unused", np.ones((3, 3)))
    tape = Tape()
    binding = store.bind(tape)
    backward(ad.sum_all(binding["used"]))
    store.harvest(binding)
    np.testing.assert_array_equal(store.grads["used"], np.ones((2, 2)))
    np.testing.assert_array_equal(store.grads["unused"], np.zeros((3, 3)))
