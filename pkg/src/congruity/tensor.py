"""Dense rank-<=2 float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a (rows, cols) numpy float64 array. While a Tape is active,
every primitive that touches a grad-requiring tensor appends a pull
closure to it; ``backward`` replays the tape in exact reverse execution
order, accumulating gradients into leaves and discarding intermediate
adjoints as soon as they have been consumed.

Finiteness contract: tensor entries must be finite. Construction through
``Tensor(...)`` validates this (that is the path external data takes);
interior op outputs are finite by construction whenever their inputs are,
and the optimizer re-validates parameters on every step, so divergence
surfaces at the step boundary instead of taxing every primitive.
"""

from __future__ import annotations

import threading
from typing import Callable, Literal

import numpy as np

from .errors import ConfigError, ContractError, ShapeError

Axis = Literal["rows", "cols"]


class Tensor:
    """A (rows, cols) float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "is_leaf")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are rank <= 2, got array of shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ContractError("tensor entries must be finite (found NaN or Inf)")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.is_leaf = True

    @classmethod
    def _result(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        # fast path for op outputs: skips re-validation, marks non-leaf
        out = cls.__new__(cls)
        out.data = arr
        out.grad = None
        out.requires_grad = requires_grad
        out.is_leaf = False
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ContractError(f"item() needs a (1,1) tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of executed primitives, replayable in reverse.

    Use as a context manager around the forward pass:

        with Tape() as tape:
            loss = ...
        backward(tape, loss)
    """

    __slots__ = ("records",)

    def __init__(self) -> None:
        self.records: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []

    def __enter__(self) -> "Tape":
        _STATE.stack.append(self)
        return self

    def __exit__(self, *exc) -> bool:
        _STATE.stack.pop()
        return False


class _TapeState(threading.local):
    def __init__(self) -> None:
        self.stack: list[Tape] = []


_STATE = _TapeState()


def _active_tape() -> Tape | None:
    stack = _STATE.stack
    return stack[-1] if stack else None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every grad-requiring leaf on the tape.

    Repeated calls accumulate into leaf gradients; zero them (set to None)
    between steps if that is not wanted. Intermediate adjoints are freed as
    the reverse sweep consumes them.
    """
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a scalar (1,1) loss, got shape {loss.shape}")
    if not np.isfinite(loss.data[0, 0]):
        raise ContractError("loss is not finite")
    reachable = loss.requires_grad and (
        loss.is_leaf or any(out is loss for out, _ in tape.records)
    )
    if not reachable:
        raise ContractError("loss is not reachable from the tape")
    _accumulate(loss, np.ones((1, 1)))
    for out, pull in reversed(tape.records):
        g = out.grad
        if g is not None:
            pull(g)
            if not out.is_leaf:
                out.grad = None


def zero_grads(params) -> None:
    """Clear gradient buffers on an iterable or mapping of tensors."""
    values = params.values() if hasattr(params, "values") else params
    for p in values:
        p.grad = None


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: (p,q) x (q,s) -> (p,s)."""
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    tape = _active_tape()
    rg = tape is not None and (a.requires_grad or b.requires_grad)
    out = Tensor._result(a.data @ b.data, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            if a.requires_grad:
                _accumulate(a, g @ b.data.T)
            if b.requires_grad:
                _accumulate(b, a.data.T @ g)
        tape.records.append((out, pull))
    return out


def transpose(x: Tensor) -> Tensor:
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(x.data.T, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            _accumulate(x, g.T)
        tape.records.append((out, pull))
    return out


def _broadcast_reduce(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == (1, 1):
        return g.sum().reshape(1, 1)
    return g.sum(axis=0, keepdims=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may be a (1,cols) row or (1,1) scalar broadcast."""
    if b.shape not in (a.shape, (1, a.data.shape[1]), (1, 1)):
        raise ShapeError(f"add shapes incompatible: {a.shape} + {b.shape}")
    tape = _active_tape()
    rg = tape is not None and (a.requires_grad or b.requires_grad)
    out = Tensor._result(a.data + b.data, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            if a.requires_grad:
                _accumulate(a, g)
            if b.requires_grad:
                _accumulate(b, _broadcast_reduce(g, b.data.shape))
        tape.records.append((out, pull))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; b may be a (1,1) scalar broadcast."""
    if b.shape not in (a.shape, (1, 1)):
        raise ShapeError(f"mul shapes incompatible: {a.shape} * {b.shape}")
    tape = _active_tape()
    rg = tape is not None and (a.requires_grad or b.requires_grad)
    out = Tensor._result(a.data * b.data, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            if a.requires_grad:
                _accumulate(a, g * b.data)
            if b.requires_grad:
                _accumulate(b, _broadcast_reduce(g * a.data, b.data.shape))
        tape.records.append((out, pull))
    return out


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (no gradient for the constant)."""
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(x.data * c, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            _accumulate(x, g * c)
        tape.records.append((out, pull))
    return out


def relu(x: Tensor) -> Tensor:
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(np.maximum(x.data, 0.0), rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            _accumulate(x, g * (x.data > 0.0))
        tape.records.append((out, pull))
    return out


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    """x where x >= 0, slope * x otherwise."""
    if not 0.0 < slope < 1.0:
        raise ConfigError(f"leaky_relu slope must be in (0,1), got {slope}")
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(np.where(x.data >= 0.0, x.data, slope * x.data), rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            _accumulate(x, g * np.where(x.data >= 0.0, 1.0, slope))
        tape.records.append((out, pull))
    return out


def softmax_rows(x: Tensor) -> Tensor:
    """Exp-normalize each row (max-subtracted); rows sum to 1."""
    if x.data.size == 0:
        raise ShapeError(f"softmax over empty tensor of shape {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out_arr = e / e.sum(axis=1, keepdims=True)
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(out_arr, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            dot = (g * out_arr).sum(axis=1, keepdims=True)
            _accumulate(x, out_arr * (g - dot))
        tape.records.append((out, pull))
    return out


def masked_softmax_rows(x: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax per row restricted to entries where mask is nonzero.

    Masked-out entries get weight exactly 0. Every row must keep at least
    one admissible entry; the mask is a constant (no gradient).
    """
    keep = np.asarray(mask, dtype=bool)
    if keep.shape != x.data.shape:
        raise ShapeError(f"mask shape {keep.shape} != tensor shape {x.shape}")
    if not keep.any(axis=1).all():
        raise ContractError("masked_softmax_rows: some row has no admissible entry")
    neg = np.where(keep, x.data, -np.inf)
    z = neg - neg.max(axis=1, keepdims=True)
    e = np.exp(z)
    out_arr = e / e.sum(axis=1, keepdims=True)
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(out_arr, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            dot = (g * out_arr).sum(axis=1, keepdims=True)
            _accumulate(x, out_arr * (g - dot))
        tape.records.append((out, pull))
    return out


def layer_norm_rows(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-12) -> Tensor:
    """Standardize each row (population variance), then scale and shift."""
    if eps <= 0.0:
        raise ConfigError(f"layer_norm eps must be > 0, got {eps}")
    d = x.data.shape[1]
    if gamma.shape != (1, d) or beta.shape != (1, d):
        raise ShapeError(
            f"layer_norm gamma/beta must be (1,{d}), got {gamma.shape} and {beta.shape}"
        )
    mean = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    tape = _active_tape()
    rg = tape is not None and (x.requires_grad or gamma.requires_grad or beta.requires_grad)
    out = Tensor._result(xhat * gamma.data + beta.data, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            if gamma.requires_grad:
                _accumulate(gamma, (g * xhat).sum(axis=0, keepdims=True))
            if beta.requires_grad:
                _accumulate(beta, g.sum(axis=0, keepdims=True))
            if x.requires_grad:
                gh = g * gamma.data
                m1 = gh.mean(axis=1, keepdims=True)
                m2 = (gh * xhat).mean(axis=1, keepdims=True)
                _accumulate(x, (gh - m1 - xhat * m2) * inv)
        tape.records.append((out, pull))
    return out


def concat(a: Tensor, b: Tensor, axis: Axis) -> Tensor:
    """Stack two tensors along rows or cols; the other dimension must match."""
    if axis == "rows":
        if a.data.shape[1] != b.data.shape[1]:
            raise ShapeError(f"concat rows: column counts differ: {a.shape} vs {b.shape}")
        out_arr = np.concatenate([a.data, b.data], axis=0)
    elif axis == "cols":
        if a.data.shape[0] != b.data.shape[0]:
            raise ShapeError(f"concat cols: row counts differ: {a.shape} vs {b.shape}")
        out_arr = np.concatenate([a.data, b.data], axis=1)
    else:
        raise ConfigError(f"concat axis must be 'rows' or 'cols', got {axis!r}")
    tape = _active_tape()
    rg = tape is not None and (a.requires_grad or b.requires_grad)
    out = Tensor._result(out_arr, rg)
    if rg:
        na = a.data.shape[0] if axis == "rows" else a.data.shape[1]

        def pull(g: np.ndarray) -> None:
            ga, gb = (g[:na], g[na:]) if axis == "rows" else (g[:, :na], g[:, na:])
            if a.requires_grad:
                _accumulate(a, ga)
            if b.requires_grad:
                _accumulate(b, gb)
        tape.records.append((out, pull))
    return out


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    """Rows [start, stop); gradients flow back into the sliced rows."""
    if not 0 <= start < stop <= x.data.shape[0]:
        raise ShapeError(f"row slice [{start},{stop}) invalid for shape {x.shape}")
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(x.data[start:stop], rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            full = np.zeros_like(x.data)
            full[start:stop] = g
            _accumulate(x, full)
        tape.records.append((out, pull))
    return out


def dropout(x: Tensor, rate: float, training: bool, rng_seed: int) -> Tensor:
    """Inverted dropout: zero entries with probability ``rate`` and scale
    survivors by 1/(1-rate) during training; identity at inference.

    The mask is drawn from a Philox stream keyed by ``rng_seed`` alone, so
    the same (seed, site, step) key always produces the same mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0,1), got {rate}")
    if not training or rate == 0.0:
        return x
    gen = np.random.Generator(np.random.Philox(key=rng_seed))
    mask = (gen.random(x.data.shape) >= rate) / (1.0 - rate)
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(x.data * mask, rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            _accumulate(x, g * mask)
        tape.records.append((out, pull))
    return out


def sum_all(x: Tensor) -> Tensor:
    """Sum all entries into a (1,1) scalar."""
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(x.data.sum().reshape(1, 1), rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            _accumulate(x, np.full(x.data.shape, g[0, 0]))
        tape.records.append((out, pull))
    return out


def mean_of_rows(x: Tensor) -> Tensor:
    """Average the rows of a (k,d) tensor into a single (1,d) row."""
    k = x.data.shape[0]
    tape = _active_tape()
    rg = tape is not None and x.requires_grad
    out = Tensor._result(x.data.mean(axis=0, keepdims=True), rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            _accumulate(x, np.broadcast_to(g / k, x.data.shape))
        tape.records.append((out, pull))
    return out


def cross_entropy(probs: Tensor, label: int, floor: float = 1e-12) -> Tensor:
    """-ln(probs[0, label]) with the probability floored at ``floor``."""
    if probs.data.shape[0] != 1:
        raise ShapeError(f"cross_entropy expects a (1,k) probability row, got {probs.shape}")
    if not 0 <= label < probs.data.shape[1]:
        raise ContractError(f"label {label} out of range for {probs.data.shape[1]} classes")
    p = probs.data[0, label]
    clamped = max(p, floor)
    tape = _active_tape()
    rg = tape is not None and probs.requires_grad
    out = Tensor._result(np.array([[-np.log(clamped)]]), rg)
    if rg:
        def pull(g: np.ndarray) -> None:
            gp = np.zeros_like(probs.data)
            if p > floor:
                gp[0, label] = -g[0, 0] / p
            _accumulate(probs, gp)
        tape.records.append((out, pull))
    return out
