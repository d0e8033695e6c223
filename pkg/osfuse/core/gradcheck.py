"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Union

import numpy as np

from .errors import ContractError
from .tensor import ArrayLike, Tensor

LossOp = Callable[[Dict[str, Tensor]], Union[Tensor, float]]


@dataclass
class GradRecord:
    """Parameters and the analytic gradients computed for them."""
    parameters: Dict[str, np.ndarray]
    analytic_grads: Dict[str, np.ndarray]

    def __post_init__(self):
        for name, value in self.parameters.items():
            grad = self.analytic_grads[name]
            if grad.shape != value.shape:
                raise ContractError(
                    f"gradient for '{name}' has shape {grad.shape}, parameter has {value.shape}"
                )


def _scalar(value: Union[Tensor, float]) -> Tensor:
    out = value if isinstance(value, Tensor) else Tensor(value)
    if out.size != 1:
        raise ContractError(f"op must return a scalar loss, got shape {out.shape}")
    return out


def _as_arrays(inputs: Mapping[str, ArrayLike]) -> Dict[str, np.ndarray]:
    arrays = {}
    for name, value in inputs.items():
        raw = value.data if isinstance(value, Tensor) else value
        arrays[name] = np.array(raw, dtype=np.float64, copy=True)
    return arrays


def analytic_gradients(op: LossOp, inputs: Mapping[str, ArrayLike]) -> GradRecord:
    """Run ``op`` once with gradient tracking and collect d(loss)/d(input)."""
    arrays = _as_arrays(inputs)
    params = {name: Tensor(value.copy(), requires_grad=True) for name, value in arrays.items()}
    loss = _scalar(op(params))
    loss.backward()
    grads = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data)).reshape(t.shape)
        for name, t in params.items()
    }
    return GradRecord(parameters=arrays, analytic_grads=grads)


def _evaluate(op: LossOp, arrays: Mapping[str, np.ndarray]) -> float:
    return _scalar(op({name: Tensor(value) for name, value in arrays.items()})).item()


def finite_diff_check(
    op: LossOp,
    inputs: Mapping[str, ArrayLike],
    eps: float = 1e-5,
    atol: float = 0.0,
) -> float:
    """Compare analytic gradients against central differences.

    Args:
        op: Callable taking a dict of named tensors and returning a scalar loss
        inputs: Initial values of the named inputs
        eps: Central-difference step
        atol: Absolute discrepancies at or below this are treated as exact

    Returns:
        max over every input element of
        |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    """
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    record = analytic_gradients(op, inputs)
    arrays = {name: value.copy() for name, value in record.parameters.items()}

    worst = 0.0
    for name, value in arrays.items():
        flat = value.reshape(-1)
        analytic = record.analytic_grads[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            f_plus = _evaluate(op, arrays)
            flat[i] = original - eps
            f_minus = _evaluate(op, arrays)
            flat[i] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            diff = abs(analytic[i] - numeric)
            if diff <= atol:
                continue
            worst = max(worst, diff / max(abs(analytic[i]), abs(numeric), 1e-8))
    return worst
