"""Record-to-image transforms: bar graph, distance matrix, and their 3-channel stack.

All transforms are pure: the same record and spec give a bit-identical
tensor.  Images are stored in matrix coordinates (row 0 at the top).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class Kind(enum.IntEnum):
    BAR_GRAPH = 1
    DISTANCE_MATRIX = 2
    COMBINED = 3


PX_SCALES = (1, 2, 4)


@dataclass(frozen=True)
class TransformSpec:
    kind: Kind
    psi: int = 1
    gamma: int = 2
    px_scale: int = 1
    distance_mode: str = "signed"
    expansion: tuple = (3, 3)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "expansion", tuple(int(e) for e in self.expansion))
        if self.psi < 1:
            raise ValueError("bar width psi must be >= 1")
        if self.gamma < 0:
            raise ValueError("bar gap gamma must be >= 0")
        if self.px_scale not in PX_SCALES:
            raise ValueError(f"px_scale must be one of {PX_SCALES}")
        if self.distance_mode not in ("signed", "absolute"):
            raise ValueError("distance_mode must be 'signed' or 'absolute'")
        if len(self.expansion) != 2 or min(self.expansion) < 1:
            raise ValueError("expansion must be two factors >= 1")
        if self.kind != Kind.DISTANCE_MATRIX and self.psi != self.px_scale:
            raise ValueError("bar width psi must equal px_scale for bar-graph based kinds")

    @classmethod
    def for_scale(cls, kind, px_scale: int = 1, distance_mode: str = "signed") -> "TransformSpec":
        """Default spec for a kind at px1/px2/px4: psi = px, gamma = 2, expansion = 3*px."""
        e = 3 * px_scale
        return cls(kind=Kind(kind), psi=px_scale, gamma=2, px_scale=px_scale,
                   distance_mode=distance_mode, expansion=(e, e))

    def canonical_side(self, d: int) -> int:
        return self.psi * d + self.gamma * (d + 1)

    def image_shape(self, d: int) -> tuple:
        """(H, W, C) produced for a d-field record."""
        if self.kind == Kind.BAR_GRAPH:
            w = self.canonical_side(d)
            return (w - 2 * self.psi, w, 1)
        if self.kind == Kind.DISTANCE_MATRIX:
            return (d * self.expansion[0], d * self.expansion[1], 1)
        s = self.canonical_side(d)
        return (s, s, 3)


@dataclass(frozen=True)
class ImageTensor:
    values: np.ndarray          # H x W x C, float64 in [0, 1]
    source_index: Optional[int] = None
    label: Optional[int] = None

    @property
    def shape(self) -> tuple:
        return self.values.shape


def _check_record(record) -> np.ndarray:
    x = np.asarray(record, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("record must be a non-empty 1-D vector")
    if not (x.min() >= 0.0 and x.max() <= 1.0):     # NaN fails both comparisons
        raise ValueError("record values must lie in [0, 1]")
    return x


def _bar_matrix(x: np.ndarray, psi: int, gamma: int) -> np.ndarray:
    d = x.size
    cols = psi * d + gamma * (d + 1)
    rows = cols - 2 * psi
    img = np.zeros((rows, cols))
    heights = np.floor(rows * x).astype(np.int64)
    # 1-based rows psi..B_k  ->  0-based slice [psi-1, B_k)
    j = gamma
    for k in range(d):
        if heights[k] >= psi:
            img[psi - 1:heights[k], j:j + psi] = 1.0
        j += gamma + psi
    return img


def bar_graph(record, spec: TransformSpec, source_index=None, label=None) -> ImageTensor:
    """Equidistant bar graph: field k becomes a bar of height floor(H * x_k)."""
    if spec.kind != Kind.BAR_GRAPH:
        raise ValueError("bar_graph requires a BAR_GRAPH spec")
    x = _check_record(record)
    img = _bar_matrix(x, spec.psi, spec.gamma)
    return ImageTensor(img[:, :, None], source_index, label)


def raw_distances(x: np.ndarray, mode: str = "signed") -> np.ndarray:
    """d x d matrix of x_i - x_j (or its absolute value), one entry at a time."""
    d = x.size
    m = np.empty((d, d))
    for r in range(d):
        xr = x[r]
        for c in range(d):
            m[r, c] = xr - x[c]
    if mode == "absolute":
        np.abs(m, out=m)
    return m


def normalize_distances(m: np.ndarray, mode: str = "signed") -> np.ndarray:
    lo, hi = m.min(), m.max()
    if hi - lo <= 0:
        return np.full_like(m, 0.5 if mode == "signed" else 0.0)
    out = (m - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0, out=out)


def _expand(m: np.ndarray, e1: int, e2: int) -> np.ndarray:
    """Replicate every entry into an e1 x e2 block."""
    d1, d2 = m.shape
    out = np.empty((d1 * e1, d2 * e2))
    for r in range(d1):
        for c in range(d2):
            out[r * e1:(r + 1) * e1, c * e2:(c + 1) * e2] = m[r, c]
    return out


def _fit_square(m: np.ndarray, side: int) -> np.ndarray:
    """Nearest-neighbour block replication of a d x d matrix onto side x side."""
    d = m.shape[0]
    src = (np.arange(side) * d) // side
    return m[np.ix_(src, src)]


def distance_matrix(record, spec: TransformSpec, source_index=None, label=None) -> ImageTensor:
    """Normalized pairwise-difference matrix expanded by ``spec.expansion``."""
    if spec.kind != Kind.DISTANCE_MATRIX:
        raise ValueError("distance_matrix requires a DISTANCE_MATRIX spec")
    x = _check_record(record)
    m = normalize_distances(raw_distances(x, spec.distance_mode), spec.distance_mode)
    img = _expand(m, *spec.expansion)
    return ImageTensor(img[:, :, None], source_index, label)


def combined(record, spec: TransformSpec, source_index=None, label=None) -> ImageTensor:
    """Three channels: distance matrix, bar graph, row-wise copy of the record.

    All channels are brought to the bar graph's width S = psi*d + gamma*(d+1):
    the two d x d matrices by block replication, the bar graph by padding
    2*psi background rows at the bottom.
    """
    if spec.kind != Kind.COMBINED:
        raise ValueError("combined requires a COMBINED spec")
    x = _check_record(record)
    d = x.size
    side = spec.canonical_side(d)
    out = np.zeros((side, side, 3))
    dist = normalize_distances(raw_distances(x, spec.distance_mode), spec.distance_mode)
    out[:, :, 0] = _fit_square(dist, side)
    bars = _bar_matrix(x, spec.psi, spec.gamma)
    out[:bars.shape[0], :, 1] = bars
    rows = np.repeat(x[:, None], d, axis=1)
    out[:, :, 2] = _fit_square(rows, side)
    return ImageTensor(out, source_index, label)


_DISPATCH = {
    Kind.BAR_GRAPH: bar_graph,
    Kind.DISTANCE_MATRIX: distance_matrix,
    Kind.COMBINED: combined,
}


def transform(record, spec: TransformSpec, source_index=None, label=None) -> ImageTensor:
    return _DISPATCH[spec.kind](record, spec, source_index, label)


def transform_all(features: np.ndarray, spec: TransformSpec, labels=None) -> np.ndarray:
    """Stack the images of every row of ``features`` into an N x H x W x C array."""
    h, w, c = spec.image_shape(features.shape[1])
    out = np.empty((features.shape[0], h, w, c))
    fn = _DISPATCH[spec.kind]
    for i, row in enumerate(features):
        out[i] = fn(row, spec).values
    return out


def display_array(img: ImageTensor) -> np.ndarray:
    """Vertically flipped copy for viewing bars bottom-up; stored tensors are untouched."""
    return img.values[::-1].copy()


# --- portable graymap / pixmap -------------------------------------------------

def quantize(values: np.ndarray) -> np.ndarray:
    """round(255 * v) with halves rounded up."""
    v = np.asarray(values, dtype=np.float64)
    if v.size and (np.isnan(v).any() or v.min() < 0.0 or v.max() > 1.0):
        raise ValueError("image values must lie in [0, 1]")
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def export_image(img, path) -> None:
    """Write P5 (1 channel) or P6 (3 channels), 8-bit, max value 255."""
    values = img.values if isinstance(img, ImageTensor) else np.asarray(img)
    if values.ndim == 2:
        values = values[:, :, None]
    h, w, c = values.shape
    if c not in (1, 3):
        raise ValueError("only 1- or 3-channel images can be exported")
    data = quantize(values)
    magic = b"P5" if c == 1 else b"P6"
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(data).tobytes())


def read_image(path) -> np.ndarray:
    """Read a binary PGM/PPM written by :func:`export_image` as an H x W x C uint8 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise ValueError(f"{path}: unsupported PNM variant")
    c = 1 if magic == b"P5" else 3
    data = np.frombuffer(raw, dtype=np.uint8, count=h * w * c, offset=pos)
    return data.reshape(h, w, c)
