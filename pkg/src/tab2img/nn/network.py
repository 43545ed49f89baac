"""Four conv blocks (conv 3x3 -> ReLU -> max pool 2x2) + dense ReLU + softmax."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import layers as L

N_CLASSES = 2


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    blocks: int = 4
    filter_size: int = 3
    filter_scale: float = 0.5
    hidden: int = 64
    filters: Optional[tuple] = None     # explicit per-block counts override the rule

    def filter_counts(self, image_shape) -> tuple:
        """ceil(scale * block * floor(sqrt(H*W))), at least 1, for blocks 1..n."""
        if self.filters is not None:
            if len(self.filters) != self.blocks:
                raise ValueError("need one filter count per block")
            return tuple(int(f) for f in self.filters)
        h, w = image_shape[:2]
        root = math.isqrt(h * w)
        return tuple(max(1, math.ceil(self.filter_scale * k * root))
                     for k in range(1, self.blocks + 1))

    def spatial_sizes(self, image_shape) -> list:
        h, w = image_shape[:2]
        return [(h >> k, w >> k) for k in range(self.blocks + 1)]


@dataclass
class TrainedModel:
    spec: NetworkSpec
    image_shape: tuple                  # (H, W, C)
    params: dict                        # name -> array, insertion order is canonical
    trace: list = field(default_factory=list)   # (iteration, train loss, validation accuracy)
    config: Optional[object] = None

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def weight_names(self) -> list:
        return [k for k in self.params if k.endswith(".w")]

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


def build(spec: NetworkSpec, image_shape, seed: int = 0, dtype=np.float64) -> TrainedModel:
    """Initialize filters/weights from N(0, 2/fan_in), biases at zero."""
    shape = tuple(int(v) for v in image_shape)
    h, w, c = shape + (1,) if len(shape) == 2 else shape
    if min(h, w) < 2 ** spec.blocks:
        raise ShapeError(f"image {h}x{w} is too small for {spec.blocks} 2x2 poolings "
                         f"(need side >= {2 ** spec.blocks})")
    rng = np.random.default_rng(seed)
    k = spec.filter_size
    params = {}
    c_in = c
    for i, f in enumerate(spec.filter_counts((h, w)), start=1):
        fan_in = k * k * c_in
        params[f"conv{i}.w"] = rng.normal(0.0, math.sqrt(2.0 / fan_in), (k, k, c_in, f))
        params[f"conv{i}.b"] = np.zeros(f)
        c_in = f
    fh, fw = spec.spatial_sizes((h, w))[-1]
    flat = fh * fw * c_in
    params["fc1.w"] = rng.normal(0.0, math.sqrt(2.0 / flat), (flat, spec.hidden))
    params["fc1.b"] = np.zeros(spec.hidden)
    params["fc2.w"] = rng.normal(0.0, math.sqrt(2.0 / spec.hidden), (spec.hidden, N_CLASSES))
    params["fc2.b"] = np.zeros(N_CLASSES)
    params = {name: v.astype(dtype) for name, v in params.items()}
    return TrainedModel(spec=spec, image_shape=(h, w, c), params=params)


def as_batch(model: TrainedModel, images) -> np.ndarray:
    """Stack ImageTensors / arrays into an N x H x W x C array of the model dtype."""
    if isinstance(images, np.ndarray):
        x = images
    else:
        x = np.stack([getattr(im, "values", im) for im in images])
    if x.ndim == 3:
        x = x[..., None]
    if tuple(x.shape[1:]) != tuple(model.image_shape):
        raise ShapeError(f"batch images have shape {x.shape[1:]}, model expects {model.image_shape}")
    return np.asarray(x, dtype=model.dtype)


def _forward(model, x, keep):
    p = model.params
    caches = []
    a = x
    for i in range(1, model.spec.blocks + 1):
        z, col = L.conv_forward(a, p[f"conv{i}.w"], p[f"conv{i}.b"])
        r = L.relu_forward(z)
        pooled, masks = L.maxpool_forward(r)
        if keep:
            caches.append((a.shape, col, r, masks))
        a = pooled
    flat = a.reshape(a.shape[0], -1)
    h = L.relu_forward(flat @ p["fc1.w"] + p["fc1.b"])
    logits = h @ p["fc2.w"] + p["fc2.b"]
    if keep:
        caches.append((a.shape, flat, h))
    return logits, caches


def logits(model: TrainedModel, images) -> np.ndarray:
    return _forward(model, as_batch(model, images), keep=False)[0]


def forward(model: TrainedModel, images, chunk: int = 64) -> np.ndarray:
    """Class probabilities, one row per image."""
    x = as_batch(model, images)
    out = [L.softmax(_forward(model, x[i:i + chunk], keep=False)[0])
           for i in range(0, x.shape[0], chunk)]
    return np.concatenate(out) if out else np.empty((0, N_CLASSES), dtype=x.dtype)


def l2_penalty(model: TrainedModel, l2: float) -> float:
    return l2 * sum(float(np.sum(model.params[k].astype(np.float64) ** 2))
                    for k in model.weight_names())


def loss(model: TrainedModel, images, labels, l2: float = 0.0) -> float:
    """Mean cross-entropy plus l2 * sum of squared weights (biases excluded)."""
    x = as_batch(model, images)
    y = np.asarray(labels, dtype=np.int64)
    z = _forward(model, x, keep=False)[0].astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(y.size), y].mean()) + l2_penalty(model, l2)


def backward(model: TrainedModel, images, labels, l2: float = 0.0):
    """Gradients of :func:`loss` for every parameter, and the loss itself."""
    x = as_batch(model, images)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ShapeError(f"{y.size} labels for {x.shape[0]} images")
    p = model.params
    z, caches = _forward(model, x, keep=True)
    n = x.shape[0]
    prob = L.softmax(z)
    zs = z.astype(np.float64) - z.max(axis=1, keepdims=True)
    ce = -(zs[np.arange(n), y] - np.log(np.exp(zs).sum(axis=1))).mean()
    total = float(ce) + l2_penalty(model, l2)

    grads = {}
    dz = prob.copy()
    dz[np.arange(n), y] -= 1
    dz /= n
    pooled_shape, flat, h = caches.pop()
    grads["fc2.w"] = h.T @ dz
    grads["fc2.b"] = dz.sum(axis=0)
    dh = L.relu_backward(dz @ p["fc2.w"].T, h)
    grads["fc1.w"] = flat.T @ dh
    grads["fc1.b"] = dh.sum(axis=0)
    da = (dh @ p["fc1.w"].T).reshape(pooled_shape)
    for i in range(model.spec.blocks, 0, -1):
        in_shape, col, r, masks = caches.pop()
        dr = L.maxpool_backward(da, r.shape, masks)
        dzc = L.relu_backward(dr, r)
        da, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = L.conv_backward(
            dzc, in_shape, col, p[f"conv{i}.w"])
    if l2:
        for k in model.weight_names():
            grads[k] = grads[k] + (2.0 * l2) * p[k]
    return {k: grads[k].astype(p[k].dtype, copy=False) for k in p}, total


def predict(model: TrainedModel, images) -> np.ndarray:
    """argmax of the class probabilities; an exact tie goes to class 0."""
    return predict_from_probabilities(forward(model, images))


def predict_from_probabilities(prob) -> np.ndarray:
    prob = np.asarray(prob)
    return (prob[:, 1] > prob[:, 0]).astype(np.int64)
