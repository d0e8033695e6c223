import numpy as np
import pytest

from osfuse.core import tensor as T
from osfuse.core.errors import ContractError
from osfuse.core.gradcheck import GradRecord, analytic_gradients, finite_diff_check
from osfuse.detection.losses import bce


def test_sum_of_squares_gradient_is_exact(rng):
    err = finite_diff_check(lambda p: (p["x"] * p["x"]).sum(), {"x": rng.normal(size=5)})
    assert err < 1e-6


def test_constant_loss_has_zero_error():
    assert finite_diff_check(lambda p: T.Tensor(3.0), {"x": np.ones(3)}) == 0.0


def test_bce_at_half_probability():
    err = finite_diff_check(lambda p: bce(p["p"], [1.0]), {"p": [0.5]}, eps=1e-6)
    assert err < 1e-5


def test_analytic_gradients_reports_every_input(rng):
    record = analytic_gradients(
        lambda p: (p["w"] * 3.0).sum(), {"w": rng.normal(size=(2, 2)), "unused": np.ones(2)}
    )
    np.testing.assert_array_equal(record.analytic_grads["w"], np.full((2, 2), 3.0))
    np.testing.assert_array_equal(record.analytic_grads["unused"], np.zeros(2))


def test_non_scalar_loss_is_rejected():
    with pytest.raises(ContractError, match="scalar"):
        finite_diff_check(lambda p: p["x"] * 2.0, {"x": np.ones(3)})


@pytest.mark.parametrize("eps", [0.0, -1e-3])
def test_non_positive_step_is_rejected(eps):
    with pytest.raises(ContractError):
        finite_diff_check(lambda p: p["x"].sum(), {"x": np.ones(2)}, eps=eps)


def test_grad_record_checks_shapes():
    with pytest.raises(ContractError):
        GradRecord(parameters={"x": np.ones(2)}, analytic_grads={"x": np.ones(3)})


@pytest.mark.parametrize(
    "op",
    [
        lambda p: T.softmax_lastdim(p["x"])[..., 0].sum(),
        lambda p: (T.log_softmax_lastdim(p["x"]) * np.arange(4.0)).sum(),
        lambda p: (T.sigmoid(p["x"]) * T.softplus(p["x"])).sum(),
        lambda p: T.sqrt(p["x"] * p["x"] + 1.0).sum(),
        lambda p: (T.matmul(p["x"], p["x"].transpose()) * 0.5).sum(),
    ],
)
def test_primitive_gradients(op, rng):
    for _ in range(5):
        x = rng.normal(size=(3, 4))
        assert finite_diff_check(op, {"x": x}, atol=1e-9) < 1e-4
