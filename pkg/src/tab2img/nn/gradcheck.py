"""Central finite-difference check of :func:`network.backward`."""
import numpy as np

from . import network as net


def relative_error(analytic, numeric, floor=1e-8):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(model, images, labels, l2=0.0, per_param=100, eps=1e-6, seed=0):
    """Compare analytic and numeric gradients on sampled entries of every parameter.

    The model must be float64.  Returns a list of
    ``(name, index, analytic, numeric, relative_error)``.
    """
    if model.dtype != np.float64:
        raise ValueError("gradient checks need a float64 model")
    rng = np.random.default_rng(seed)
    grads, _ = net.backward(model, images, labels, l2)
    out = []
    for name, value in model.params.items():
        flat = value.reshape(-1)
        picks = rng.choice(flat.size, size=min(per_param, flat.size), replace=False)
        for i in picks:
            old = flat[i]
            flat[i] = old + eps
            up = net.loss(model, images, labels, l2)
            flat[i] = old - eps
            down = net.loss(model, images, labels, l2)
            flat[i] = old
            numeric = (up - down) / (2 * eps)
            analytic = float(grads[name].reshape(-1)[i])
            idx = np.unravel_index(i, value.shape)
            out.append((name, tuple(int(v) for v in idx), analytic, numeric,
                        relative_error(analytic, numeric)))
    return out
