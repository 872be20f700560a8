"""Central finite-difference gradient checks.

The checked quantity is the scalar ``L = sum(f(x) * r)`` for a fixed random
projection ``r``, so the analytic gradient of any layer is its backward
pass applied to ``r``.  Coordinates whose +-h perturbation flips any ReLU
are excluded: the derivative does not exist across the kink.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .layers import ReLU


def _relu_signature(module) -> bytes:
    parts = []
    for m in module.modules():
        if isinstance(m, ReLU) and m._y is not None and not m.linear:
            parts.append(np.packbits(m._y > 0).tobytes())
    return b"".join(parts)


def numeric_gradient(f: Callable[[], float], x: np.ndarray, h: float = 1e-5,
                     index=None, signature: Callable[[], bytes] | None = None):
    """Central differences of the scalar ``f()`` w.r.t. ``x`` (perturbed in place).

    Returns ``(grad, valid)``; ``valid`` is False where ``signature()``
    after ``f()`` changed between the base point and either perturbation.
    """
    flat = x.reshape(-1)
    index = np.arange(flat.size) if index is None else np.asarray(index)
    grad = np.zeros(index.size)
    valid = np.ones(index.size, dtype=bool)
    base = None
    if signature is not None:
        f()
        base = signature()
    for k, i in enumerate(index):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        sp = signature() if signature is not None else None
        flat[i] = old - h
        fm = f()
        sm = signature() if signature is not None else None
        flat[i] = old
        grad[k] = (fp - fm) / (2 * h)
        if signature is not None:
            valid[k] = sp == base and sm == base
    return grad, valid


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-2) -> float:
    """Max absolute deviation scaled by the larger gradient magnitude.

    The scale never drops below ``floor``, so gradients that are exactly zero
    (e.g. a conv bias feeding train-mode BatchNorm) compare absolutely
    against a fraction of the overall gradient magnitude.
    """
    if analytic.size == 0:
        return 0.0
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def check_module(module, x: np.ndarray, seed: int = 0, h: float = 1e-5,
                 max_entries: int | None = None) -> dict[str, float]:
    """Compare a module's backward pass with finite differences.

    Returns relative errors for the input and each named parameter.  When
    ``max_entries`` is set, each array is checked on a random subset of that
    many entries.
    """
    # separate stream: a projection equal to the input cancels in BatchNorm
    rng = np.random.default_rng([seed, 0x5EED])
    x = np.array(x, dtype=np.float64)
    out = module.forward(x)
    r = rng.standard_normal(out.shape)

    def loss():
        return float(np.sum(module.forward(x) * r))

    module.zero_grad()
    module.forward(x)
    dx = module.backward(r)
    grads = {name: p.grad.copy() for name, p in module.named_parameters()}

    def sig():
        return _relu_signature(module)

    # zero-gradient arrays are judged against the module's gradient scale
    floor = 1e-2 * max([np.max(np.abs(dx))] + [np.max(np.abs(g)) for g in grads.values()])
    floor = max(floor, 1e-12)

    def compare(analytic, arr):
        idx = None
        if max_entries is not None and arr.size > max_entries:
            idx = rng.choice(arr.size, size=max_entries, replace=False)
        num, ok = numeric_gradient(loss, arr, h, idx, sig)
        a = analytic.reshape(-1) if idx is None else analytic.reshape(-1)[idx]
        return relative_error(a[ok], num[ok], floor)

    errors = {"input": compare(dx, x)}
    for name, p in module.named_parameters():
        errors[name] = compare(grads[name], p.value)
    return errors
