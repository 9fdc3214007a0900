"""Gradient verification: reverse-mode gradients vs central finite
differences.

The reported figure is the worst error relative to the gradient's own
magnitude, floored at unit scale (the loss is order one), so components
whose true gradient sits below the finite-difference noise floor are
compared absolutely instead of producing 0/0 noise. Real backward bugs
produce errors on the order of the components themselves and land far
above the 1e-6 acceptance threshold either way.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .config import Config
from .data import Sample, make_sample
from .errors import ConfigError
from .model import ModelDims, count_params, forward_sample, init_params
from .optim import AdamState  # noqa: F401  (re-exported for the CLI's dry-run path)
from .rng import stream
from .tensor import Tape, Tensor, backward, zero_grads

DEFAULT_EPSILON = 1e-5
DEFAULT_THRESHOLD = 1e-6


def finite_difference(loss_fn, params: dict[str, Tensor],
                      epsilon: float = DEFAULT_EPSILON) -> dict[str, np.ndarray]:
    """Central-difference gradient of a scalar loss for every parameter
    component, perturbing parameters in place."""
    grads = {}
    for name, p in params.items():
        flat = p.data.ravel()
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = loss_fn()
            flat[i] = orig - epsilon
            f_minus = loss_fn()
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * epsilon)
        grads[name] = g.reshape(p.data.shape)
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray],
                       floor: float = 1.0) -> float:
    """Worst |analytic - numeric| / max(|analytic|, |numeric|, floor)."""
    worst = 0.0
    for name, a in analytic.items():
        b = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        err = float((np.abs(a - b) / denom).max()) if a.size else 0.0
        worst = max(worst, err)
    return worst


def random_check_sample(n: int, p: int, m: int, raw_width: int, seed: int) -> Sample:
    """A random sample (chain + extra edges) for gradient checking."""
    rs = stream(seed, "gradcheck/sample")
    def edges(length: int) -> list[tuple[int, int]]:
        chain = [(i, i + 1) for i in range(length - 1)]
        extra = [(int(a), int(b)) for a, b in rs.integers(0, length, size=(max(length // 3, 1), 2))
                 if a != b]
        return chain + extra
    return make_sample(
        id=f"gradcheck-n{n}-p{p}-m{m}",
        label=int(rs.integers(0, 2)),
        text_embed=0.5 * rs.normal(size=(n, raw_width)),
        image_embed=0.5 * rs.normal(size=(p * p, raw_width)),
        grid_side=p,
        text_edges=edges(n),
        knowledge_embed=0.5 * rs.normal(size=(m, raw_width)) if m > 0 else None,
        knowledge_edges=edges(m) if m > 0 else None,
    )


@dataclass
class GradCheckReport:
    max_rel_error: float
    param_count: int
    component_count: int
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < DEFAULT_THRESHOLD


def check_model_gradients(config: Config, n: int = 4, r: int = 4, m: int = 3,
                          raw_width: int = 6, epsilon: float = DEFAULT_EPSILON,
                          sample: Sample | None = None) -> GradCheckReport:
    """Compare reverse-mode gradients of the full per-sample loss against
    central finite differences for every parameter component.

    Dropout stays active (training mode, fixed step), so the checked
    function is exactly the training loss; masks are deterministic in the
    stream keys and therefore identical across the probe evaluations.
    """
    config.validate()
    p = math.isqrt(r)
    if p * p != r:
        raise ConfigError(f"gradcheck needs a square patch count, got r={r}")
    if sample is None:
        sample = random_check_sample(n, p, m if config.knowledge_enabled else 0,
                                     raw_width, config.seed)
    dims = ModelDims(d_text=raw_width, d_img=raw_width,
                     d_know=raw_width if config.knowledge_enabled else 0,
                     r=r, m_max=config.max_knowledge_len)
    params = init_params(config, dims)

    started = time.perf_counter()

    def loss_fn() -> float:
        return forward_sample(params, sample, config, dims, training=True, step=0).loss.item()

    zero_grads(params)
    with Tape() as tape:
        result = forward_sample(params, sample, config, dims, training=True, step=0)
    backward(tape, result.loss)
    analytic = {name: (p_.grad.copy() if p_.grad is not None else np.zeros_like(p_.data))
                for name, p_ in params.items()}

    numeric = finite_difference(loss_fn, params, epsilon)
    err = max_relative_error(analytic, numeric)
    return GradCheckReport(
        max_rel_error=err,
        param_count=count_params(params),
        component_count=sum(g.size for g in analytic.values()),
        seconds=time.perf_counter() - started,
    )
