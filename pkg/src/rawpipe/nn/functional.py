"""Forward/backward kernels on NCHW arrays.

Only stride-1, same-padded convolutions with 1x1 or 3x3 kernels are
supported, which is all the Inception-family networks need.
"""

from __future__ import annotations

import numpy as np


def _im2col3(x: np.ndarray) -> np.ndarray:
    """(N, C, H, W) -> (N, C*9, H*W) columns for a same-padded 3x3 kernel."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    taps = [xp[:, :, dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)]
    return np.stack(taps, axis=2).reshape(n, c * 9, h * w)


def _col2im3(cols: np.ndarray, shape) -> np.ndarray:
    n, c, h, w = shape
    cols = cols.reshape(n, c, 9, h, w)
    dxp = np.zeros((n, c, h + 2, w + 2), dtype=cols.dtype)
    t = 0
    for dy in range(3):
        for dx in range(3):
            dxp[:, :, dy:dy + h, dx:dx + w] += cols[:, :, t]
            t += 1
    return dxp[:, :, 1:-1, 1:-1]


def _check_conv(x: np.ndarray, w: np.ndarray) -> int:
    if x.ndim != 4:
        raise ValueError(f"conv input must be NCHW, got shape {x.shape}")
    k = w.shape[-1]
    if k not in (1, 3) or w.shape[-2] != k:
        raise ValueError(f"kernel must be 1x1 or 3x3, got {w.shape[-2:]}")
    if w.shape[1] != x.shape[1]:
        raise ValueError(f"channel mismatch: input has {x.shape[1]}, weights expect {w.shape[1]}")
    return k


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    """Cross-correlation, stride 1, same padding.  ``w`` is (O, C, k, k)."""
    k = _check_conv(x, w)
    n, c, h, wd = x.shape
    o = w.shape[0]
    if k == 1:
        out = np.matmul(w.reshape(o, c), x.reshape(n, c, h * wd))
    else:
        out = np.matmul(w.reshape(o, c * 9), _im2col3(x))
    out = out.reshape(n, o, h, wd)
    if b is not None:
        out += b.reshape(1, o, 1, 1)
    return out


def conv2d_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients ``(dx, dw, db)`` of a same-padded convolution."""
    k = _check_conv(x, w)
    n, c, h, wd = x.shape
    o = w.shape[0]
    g = dout.reshape(n, o, h * wd)
    db = g.sum(axis=(0, 2))
    if k == 1:
        cols = x.reshape(n, c, h * wd)
        wmat = w.reshape(o, c)
    else:
        cols = _im2col3(x)
        wmat = w.reshape(o, c * 9)
    dw = np.einsum("nop,nqp->oq", g, cols, optimize=True).reshape(w.shape)
    dcols = np.matmul(wmat.T, g)
    if k == 1:
        dx = dcols.reshape(x.shape)
    else:
        dx = _col2im3(dcols, x.shape)
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train: bool,
                      momentum: float = 0.9, eps: float = 1e-5):
    """Per-channel batch normalization.

    In train mode normalizes with the biased batch variance and updates the
    running statistics in place (``r = momentum * r + (1 - momentum) * batch``).
    Returns ``(out, cache)``.
    """
    if x.shape[1] != gamma.shape[0]:
        raise ValueError(f"batchnorm expects {gamma.shape[0]} channels, got {x.shape[1]}")
    shape = (1, -1, 1, 1)
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        m = x.size // x.shape[1]
        unbiased = var * m / max(m - 1, 1)
        running_mean *= momentum
        running_mean += (1 - momentum) * mean
        running_var *= momentum
        running_var += (1 - momentum) * unbiased
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
    out = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return out, (xhat, inv_std, gamma, train)


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, train = cache
    shape = (1, -1, 1, 1)
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma.reshape(shape)
    if not train:
        return dxhat * inv_std.reshape(shape), dgamma, dbeta
    m = dout.size // dout.shape[1]
    dx = (inv_std.reshape(shape) / m) * (
        m * dxhat
        - dxhat.sum(axis=(0, 2, 3), keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
    )
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(dout, x):
    return dout * (x > 0)
