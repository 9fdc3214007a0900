"""Backward-pass checks: hand-derived cases plus central finite
differences for every primitive."""

import numpy as np
import pytest

from congruity.errors import ContractError
from congruity.gradcheck import finite_difference, max_relative_error
from congruity.tensor import (Tape, Tensor, add, backward, concat,
                              cross_entropy, dropout, layer_norm_rows,
                              leaky_relu, masked_softmax_rows, matmul,
                              mean_of_rows, mul, relu, scale, slice_rows,
                              softmax_rows, sum_all, transpose, zero_grads)


def test_backward_sum_gives_ones():
    x = Tensor(np.arange(4.0).reshape(2, 2), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(x)
    backward(tape, loss)
    assert np.array_equal(x.grad, np.ones((2, 2)))


def test_backward_linear_gives_column_sums():
    w = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    x = Tensor(np.array([[7.0], [8.0]]), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(matmul(Tensor(w), x))
    backward(tape, loss)
    assert np.array_equal(x.grad, w.sum(axis=0).reshape(2, 1))


def test_backward_requires_scalar_loss():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        y = matmul(x, x)
    with pytest.raises(ContractError):
        backward(tape, y)


def test_backward_unreachable_loss_errors():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        matmul(x, x)
    with pytest.raises(ContractError):
        backward(tape, Tensor(1.0))


def test_repeated_backward_accumulates():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(mul(x, x))
    backward(tape, loss)
    first = x.grad.copy()
    backward(tape, loss)
    assert np.allclose(x.grad, 2.0 * first)
    zero_grads([x])
    assert x.grad is None


def test_cross_entropy_values_and_gradient():
    probs = Tensor([[0.9, 0.1]], requires_grad=True)
    with Tape() as tape:
        loss = cross_entropy(probs, 0)
    assert abs(loss.item() - 0.10536051565782628) < 1e-15
    backward(tape, loss)
    np.testing.assert_allclose(probs.grad, [[-1.0 / 0.9, 0.0]])

    assert abs(cross_entropy(Tensor([[0.5, 0.5]]), 1).item() - np.log(2.0)) < 1e-15
    assert cross_entropy(Tensor([[1.0, 0.0]]), 0).item() == 0.0
    with pytest.raises(ContractError):
        cross_entropy(Tensor([[0.5, 0.5]]), 2)


def _fd_check(build, params, tol=1e-6):
    """build() -> scalar loss Tensor using the tensors in params."""
    zero_grads(params)
    with Tape() as tape:
        loss = build()
    backward(tape, loss)
    analytic = {k: p.grad.copy() for k, p in params.items()}

    def loss_fn():
        return build().item()

    numeric = finite_difference(loss_fn, params)
    err = max_relative_error(analytic, numeric)
    assert err < tol, f"gradient mismatch: {err}"


def test_primitive_gradients_match_finite_differences(rng):
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    c = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    row = Tensor(rng.normal(size=(1, 2)), requires_grad=True)
    scalar = Tensor(rng.normal(size=(1, 1)), requires_grad=True)
    gamma = Tensor(rng.normal(size=(1, 4)) + 1.5, requires_grad=True)
    beta = Tensor(rng.normal(size=(1, 4)), requires_grad=True)
    # fixed fold weights: the loss must be the same function on every probe
    w = Tensor(rng.normal(size=(3, 2)))
    w4 = Tensor(rng.normal(size=(3, 4)))
    w_col = Tensor(rng.normal(size=(3, 1)))
    w_tall = Tensor(rng.normal(size=(6, 4)))
    w_wide = Tensor(rng.normal(size=(3, 4)))
    w_slice = Tensor(rng.normal(size=(2, 4)))
    w_row = Tensor(rng.normal(size=(1, 4)))
    mask = (rng.random((3, 4)) < 0.7)
    mask[:, 0] = True

    cases = {
        "matmul": ({"a": a, "b": b}, lambda: sum_all(mul(matmul(a, b), w))),
        "transpose": ({"a": a}, lambda: sum_all(matmul(transpose(a), w_col))),
        "add_row": ({"c": c, "row": row}, lambda: sum_all(mul(add(c, row), w))),
        "add_scalar": ({"c": c, "scalar": scalar}, lambda: sum_all(mul(add(c, scalar), w))),
        "mul": ({"a": a}, lambda: sum_all(mul(mul(a, a), w4))),
        "scale": ({"a": a}, lambda: sum_all(mul(scale(a, -2.5), w4))),
        "relu": ({"a": a}, lambda: sum_all(mul(relu(a), w4))),
        "leaky": ({"a": a}, lambda: sum_all(mul(leaky_relu(a, 0.2), w4))),
        "softmax": ({"a": a}, lambda: sum_all(mul(softmax_rows(a), w4))),
        "masked_softmax": ({"a": a}, lambda: sum_all(mul(masked_softmax_rows(a, mask), w4))),
        "layer_norm": ({"a": a, "gamma": gamma, "beta": beta},
                       lambda: sum_all(mul(layer_norm_rows(a, gamma, beta, 1e-12), w4))),
        "concat_rows": ({"a": a}, lambda: sum_all(mul(concat(a, a, "rows"), w_tall))),
        "concat_cols": ({"c": c}, lambda: sum_all(mul(concat(c, c, "cols"), w_wide))),
        "slice_rows": ({"a": a}, lambda: sum_all(mul(slice_rows(a, 1, 3), w_slice))),
        "dropout": ({"a": a}, lambda: sum_all(mul(dropout(a, 0.4, True, 77), w4))),
        "mean_of_rows": ({"a": a}, lambda: sum_all(mul(mean_of_rows(a), w_row))),
        "sum_all": ({"a": a}, lambda: sum_all(a)),
    }
    for name, (params, build) in cases.items():
        try:
            _fd_check(build, params)
        except AssertionError as exc:
            raise AssertionError(f"{name}: {exc}") from exc


def test_composed_expression_gradient(rng):
    x = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    w1 = Tensor(rng.normal(size=(5, 5)), requires_grad=True)
    gamma = Tensor(np.ones((1, 5)), requires_grad=True)
    beta = Tensor(np.zeros((1, 5)), requires_grad=True)
    fold = Tensor(rng.normal(size=(4, 5)))

    def build():
        h = relu(matmul(x, w1))
        normed = layer_norm_rows(add(x, h), gamma, beta, 1e-12)
        return sum_all(mul(softmax_rows(normed), fold))

    _fd_check(build, {"x": x, "w1": w1, "gamma": gamma, "beta": beta})
