import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from tab2img import transform as T
from tab2img.transform import Kind, TransformSpec

records = hnp.arrays(np.float64, st.integers(1, 16), elements=st.floats(0, 1))


def bar_spec(px=1):
    return TransformSpec.for_scale(Kind.BAR_GRAPH, px)


def runs_per_row(img2d):
    """Number of maximal runs of foreground pixels in each row."""
    fg = img2d > 0
    starts = fg & ~np.pad(fg, ((0, 0), (1, 0)))[:, :-1]
    return starts.sum(axis=1)


def reference_bars(x, psi, gamma):
    """Direct transcription of the bar-graph pseudocode with 1-based indices."""
    d = len(x)
    R = C = psi * d + gamma * (d + 1)
    R = R - 2 * psi
    H = R
    M = np.zeros((R + 1, C + 1))      # index 0 unused
    B = [int(np.floor(H * v)) for v in x]
    j, k = gamma + 1, 1
    while j <= C - gamma:
        for r in range(psi, B[k - 1] + 1):
            M[r, j:j + psi] = 1
        k += 1
        j += gamma + psi
        if k > d:
            break
    return M[1:, 1:]


def test_bar_geometry_d30():
    img = T.bar_graph(np.zeros(30), bar_spec(1))
    assert img.shape == (90, 92, 1)            # 30 + 2*31 = 92 wide, 92 - 2 = 90 high
    assert not img.values.any()


def test_full_height_bar():
    x = np.zeros(5)
    x[2] = 1.0
    img = T.bar_graph(x, bar_spec(1)).values[:, :, 0]
    col = 2 + 2 * 3                           # 0-based first column of bar 3
    assert img[:, col].all()
    assert img.sum() == img.shape[0]


@pytest.mark.parametrize("px", T.PX_SCALES)
@pytest.mark.parametrize("d", [1, 3, 9, 30])
def test_bar_graph_matches_pseudocode(px, d, rng):
    spec = bar_spec(px)
    for _ in range(5):
        x = rng.random(d)
        x[rng.integers(d)] = 1.0
        np.testing.assert_array_equal(T.bar_graph(x, spec).values[:, :, 0],
                                      reference_bars(x, spec.psi, spec.gamma))


@settings(max_examples=100, deadline=None)
@given(records, st.sampled_from(T.PX_SCALES))
def test_bar_graph_properties(x, px):
    spec = bar_spec(px)
    img = T.bar_graph(x, spec).values[:, :, 0]
    d = x.size
    assert img.shape[1] == px * d + 2 * (d + 1)
    assert runs_per_row(img).max(initial=0) <= d
    heights = np.floor(img.shape[0] * x).astype(int)
    for k in range(d):
        col = img[:, 2 + k * (2 + px)]
        expected = max(0, heights[k] - (px - 1)) if heights[k] >= px else 0
        assert col.sum() == expected


@settings(max_examples=50, deadline=None)
@given(records, st.integers(0, 15), st.floats(0, 1))
def test_bar_height_monotone(x, k, bump):
    k = k % x.size
    y = x.copy()
    y[k] = max(x[k], bump)
    h = T.bar_graph(x, bar_spec()).values[:, 2 + 3 * k, 0].sum()
    h2 = T.bar_graph(y, bar_spec()).values[:, 2 + 3 * k, 0].sum()
    assert h2 >= h


def test_distance_matrix_example():
    spec = TransformSpec(Kind.DISTANCE_MATRIX, expansion=(1, 1))
    img = T.distance_matrix([0, 0.5, 1], spec).values[:, :, 0]
    # x_i - x_j = [[0,-.5,-1],[.5,0,-.5],[1,.5,0]], then (m + 1) / 2
    np.testing.assert_allclose(img, [[0.5, 0.25, 0], [0.75, 0.5, 0.25], [1, 0.75, 0.5]])


def test_distance_matrix_constant_record():
    signed = TransformSpec.for_scale(Kind.DISTANCE_MATRIX, 1)
    absolute = TransformSpec.for_scale(Kind.DISTANCE_MATRIX, 1, distance_mode="absolute")
    assert np.all(T.distance_matrix(np.full(4, 0.3), signed).values == 0.5)
    assert np.all(T.distance_matrix(np.full(4, 0.3), absolute).values == 0.0)


def test_distance_matrix_expansion():
    spec = TransformSpec.for_scale(Kind.DISTANCE_MATRIX, 2)
    x = np.array([0.1, 0.9, 0.4])
    img = T.distance_matrix(x, spec).values[:, :, 0]
    assert img.shape == (18, 18)
    small = T.normalize_distances(T.raw_distances(x))
    np.testing.assert_array_equal(img, np.kron(small, np.ones((6, 6))))


def test_signed_antisymmetry_brute_force(rng):
    spec = TransformSpec(Kind.DISTANCE_MATRIX, expansion=(1, 1))
    for _ in range(200):
        d = int(rng.integers(2, 31))
        x = rng.random(d)
        raw = np.array([[x[i] - x[j] for j in range(d)] for i in range(d)])
        assert np.all(raw == -raw.T)
        m = T.distance_matrix(x, spec).values[:, :, 0]
        assert np.abs(m + m.T - 1).max() <= 1e-12
        assert np.abs(np.diag(m) - 0.5).max() <= 1e-12


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, st.integers(2, 12), elements=st.floats(0, 1)))
def test_absolute_mode_symmetric(x):
    spec = TransformSpec(Kind.DISTANCE_MATRIX, expansion=(1, 1), distance_mode="absolute")
    raw = T.raw_distances(x, "absolute")
    assert np.array_equal(raw, raw.T)
    m = T.distance_matrix(x, spec).values[:, :, 0]
    assert np.array_equal(m, m.T)
    assert not np.diag(m).any()


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, st.integers(2, 12), elements=st.floats(0, 1)), st.randoms())
def test_permutation_equivariance(x, pyrandom):
    perm = list(range(x.size))
    pyrandom.shuffle(perm)
    perm = np.array(perm)
    dspec = TransformSpec(Kind.DISTANCE_MATRIX, expansion=(1, 1))
    m = T.distance_matrix(x, dspec).values[:, :, 0]
    mp = T.distance_matrix(x[perm], dspec).values[:, :, 0]
    np.testing.assert_array_equal(mp, m[np.ix_(perm, perm)])
    bars = T.bar_graph(x, bar_spec()).values[:, :, 0]
    bars_p = T.bar_graph(x[perm], bar_spec()).values[:, :, 0]
    cols = 2 + 3 * np.arange(x.size)
    np.testing.assert_array_equal(bars_p[:, cols], bars[:, cols[perm]])


def test_combined_geometry():
    spec = TransformSpec.for_scale(Kind.COMBINED, 1)
    assert T.combined(np.linspace(0, 1, 30), spec).shape == (92, 92, 3)
    assert spec.image_shape(9) == (29, 29, 3)


def test_combined_zero_record():
    img = T.combined(np.zeros(30), TransformSpec.for_scale(Kind.COMBINED, 1)).values
    assert np.all(img[:, :, 0] == 0.5)
    assert not img[:, :, 1].any()
    assert not img[:, :, 2].any()


@pytest.mark.parametrize("px", T.PX_SCALES)
def test_combined_channels(px, rng):
    spec = TransformSpec.for_scale(Kind.COMBINED, px)
    x = rng.random(9)
    img = T.combined(x, spec).values
    s = spec.canonical_side(9)
    assert img.shape == (s, s, 3)
    bars = T.bar_graph(x, bar_spec(px)).values[:, :, 0]
    np.testing.assert_array_equal(img[:bars.shape[0], :, 1], bars)
    assert not img[bars.shape[0]:, :, 1].any()
    # value channel: every row constant and equal to one field, all fields present
    ch3 = img[:, :, 2]
    assert np.all(ch3 == ch3[:, :1])
    np.testing.assert_array_equal(np.unique(ch3[:, 0]), np.unique(x))
    # distance channel covers every (i, j) entry of the d x d matrix
    small = T.normalize_distances(T.raw_distances(x))
    assert set(np.unique(img[:, :, 0])) == set(np.unique(small))


def test_pure_functions(rng):
    x = rng.random(12)
    for kind in Kind:
        spec = TransformSpec.for_scale(kind, 2)
        a, b = T.transform(x, spec), T.transform(x.copy(), spec)
        assert a.values.tobytes() == b.values.tobytes()


def test_spec_validation():
    with pytest.raises(ValueError):
        TransformSpec(Kind.BAR_GRAPH, psi=0)
    with pytest.raises(ValueError):
        TransformSpec(Kind.BAR_GRAPH, gamma=-1)
    with pytest.raises(ValueError):
        TransformSpec(Kind.BAR_GRAPH, px_scale=3)
    with pytest.raises(ValueError):
        TransformSpec(Kind.BAR_GRAPH, psi=1, px_scale=2)
    with pytest.raises(ValueError):
        T.bar_graph([], bar_spec())
    with pytest.raises(ValueError):
        T.bar_graph([1.5], bar_spec())
    with pytest.raises(ValueError):
        T.bar_graph([0.5], TransformSpec.for_scale(Kind.COMBINED, 1))


def test_display_flip_leaves_tensor():
    img = T.bar_graph([1.0, 0.5], bar_spec())
    before = img.values.copy()
    flipped = T.display_array(img)
    np.testing.assert_array_equal(flipped, before[::-1])
    np.testing.assert_array_equal(img.values, before)


@pytest.mark.parametrize("value, byte", [(1.0, 255), (0.5, 128), (0.0, 0), (1 / 255, 1)])
def test_quantize(value, byte):
    assert T.quantize(np.array([value]))[0] == byte


def test_export_roundtrip(tmp_path, rng):
    gray = T.distance_matrix(rng.random(7), TransformSpec.for_scale(Kind.DISTANCE_MATRIX, 1))
    color = T.combined(rng.random(7), TransformSpec.for_scale(Kind.COMBINED, 1))
    for img, name, magic in ((gray, "g.pgm", b"P5"), (color, "c.ppm", b"P6")):
        path = tmp_path / name
        T.export_image(img, path)
        raw = path.read_bytes()
        h, w, c = img.shape
        assert raw.startswith(magic + b"\n%d %d\n255\n" % (w, h))
        assert len(raw) == len(magic) + len(b"\n%d %d\n255\n" % (w, h)) + h * w * c
        back = T.read_image(path)
        np.testing.assert_array_equal(back, T.quantize(img.values))


def test_export_rejects_out_of_range(tmp_path):
    with pytest.raises(ValueError):
        T.export_image(np.full((2, 2), 1.5), tmp_path / "x.pgm")


def test_export_unwritable(tmp_path):
    with pytest.raises(OSError):
        T.export_image(np.zeros((2, 2)), tmp_path / "no" / "such" / "dir.pgm")
