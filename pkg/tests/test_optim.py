import numpy as np
import pytest

from congruity.errors import ContractError
from congruity.optim import AdamState, adam_step
from congruity.tensor import Tensor


def _single_param(value=0.0):
    p = Tensor(np.array([[value]]), requires_grad=True)
    return {"theta": p}


def test_adam_single_step_closed_form():
    params = _single_param(0.0)
    params["theta"].grad = np.array([[1.0]])
    state = AdamState.for_params(params, lr=0.01)
    adam_step(params, state)
    # bias-corrected m_hat = v_hat = 1 after one unit-gradient step
    expected = -0.01 * 1.0 / (1.0 + 1e-8)
    assert abs(params["theta"].data[0, 0] - expected) < 1e-15
    assert abs(params["theta"].data[0, 0] + 0.01) < 1e-9
    assert state.step_count == 1


def test_adam_zero_gradient_leaves_param():
    params = _single_param(1.25)
    params["theta"].grad = np.array([[0.0]])
    state = AdamState.for_params(params, lr=0.01)
    adam_step(params, state)
    assert params["theta"].data[0, 0] == 1.25


def test_adam_zero_lr_is_bitwise_noop():
    params = _single_param(0.7531)
    before = params["theta"].data.copy()
    params["theta"].grad = np.array([[3.21]])
    state = AdamState.for_params(params, lr=0.0, weight_decay=5e-3)
    adam_step(params, state)
    assert np.array_equal(params["theta"].data, before)


def test_adam_bias_correction_step_sizes_shrink():
    params = _single_param(0.0)
    state = AdamState.for_params(params, lr=0.01)
    params["theta"].grad = np.array([[1.0]])
    adam_step(params, state)
    delta1 = abs(params["theta"].data[0, 0])
    before = params["theta"].data[0, 0]
    params["theta"].grad = np.array([[1.0]])
    adam_step(params, state)
    delta2 = abs(params["theta"].data[0, 0] - before)
    assert delta2 <= delta1 * 1.001


def test_adam_decoupled_weight_decay_applies_before_update():
    params = _single_param(2.0)
    params["theta"].grad = np.array([[0.0]])
    state = AdamState.for_params(params, lr=0.1, weight_decay=0.5)
    adam_step(params, state)
    # zero gradient: only the decay term moves theta
    assert abs(params["theta"].data[0, 0] - 2.0 * (1 - 0.1 * 0.5)) < 1e-15


def test_adam_missing_gradient_errors():
    params = _single_param(0.0)
    state = AdamState.for_params(params, lr=0.01)
    with pytest.raises(ContractError):
        adam_step(params, state)
