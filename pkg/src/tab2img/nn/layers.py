"""Forward/backward kernels on NHWC arrays.

Convolutions are 3x3, stride 1, zero "same" padding, computed as one GEMM
over an im2col matrix whose columns are ordered (ky, kx, channel).  Filters
are stored as (ky, kx, C_in, C_out).
"""
import numpy as np


def im2col(x, k=3):
    """(N, H, W, C) -> (N*H*W, k*k*C) patches with same padding."""
    n, h, w, c = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    cols = [xp[:, ky:ky + h, kx:kx + w, :] for ky in range(k) for kx in range(k)]
    return np.concatenate(cols, axis=-1).reshape(n * h * w, k * k * c)


def col2im(dcol, shape, k=3):
    """Adjoint of :func:`im2col`: scatter-add patch gradients back onto the input."""
    n, h, w, c = shape
    p = k // 2
    dcol = dcol.reshape(n, h, w, k * k, c)
    dxp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=dcol.dtype)
    t = 0
    for ky in range(k):
        for kx in range(k):
            dxp[:, ky:ky + h, kx:kx + w, :] += dcol[:, :, :, t, :]
            t += 1
    return dxp[:, p:p + h, p:p + w, :]


def conv_forward(x, w, b):
    k = w.shape[0]
    n, h, wd, _ = x.shape
    col = im2col(x, k)
    out = col @ w.reshape(-1, w.shape[-1]) + b
    return out.reshape(n, h, wd, w.shape[-1]), col


def conv_backward(dout, x_shape, col, w):
    f = w.shape[-1]
    d2 = dout.reshape(-1, f)
    wm = w.reshape(-1, f)
    dw = (col.T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    dx = col2im(d2 @ wm.T, x_shape, w.shape[0])
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(dout, out):
    return dout * (out > 0)


def maxpool_forward(x):
    """2x2 window, stride 2; a trailing odd row/column is dropped."""
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    x = x[:, :2 * h2, :2 * w2, :]
    q = (x[:, 0::2, 0::2], x[:, 0::2, 1::2], x[:, 1::2, 0::2], x[:, 1::2, 1::2])
    out = np.maximum(np.maximum(q[0], q[1]), np.maximum(q[2], q[3]))
    # the first maximal position (row-major within the window) takes the gradient
    taken = np.zeros(out.shape, dtype=bool)
    masks = []
    for part in q:
        m = (part == out) & ~taken
        taken |= m
        masks.append(m)
    return out, masks


def maxpool_backward(dout, x_shape, masks):
    n, h, w, c = x_shape
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for (oy, ox), m in zip(((0, 0), (0, 1), (1, 0), (1, 1)), masks):
        dx[:, oy:2 * (h // 2):2, ox:2 * (w // 2):2, :] = dout * m
    return dx


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
