import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from tab2img import ingest
from tab2img.ingest import IngestConfig, IngestError


def _ds(features, labels=None):
    features = np.asarray(features, dtype=float)
    if labels is None:
        labels = np.arange(features.shape[0]) % 2
    return ingest.TabularDataset(features=features, labels=np.asarray(labels),
                                 feature_names=tuple(f"f{i}" for i in range(features.shape[1])))


def test_wdbc_counts(wdbc_path):
    ds = ingest.load_csv(wdbc_path, IngestConfig.wdbc())
    assert (ds.n, ds.d) == (569, 30)
    assert (int(np.sum(ds.labels == 0)), int(np.sum(ds.labels == 1))) == (357, 212)
    assert ds.feature_names[0] == "radius_mean"


def test_wbc_drop_row_count(wbc_path):
    # oracle: count lines carrying the missing token directly in the file text
    with open(wbc_path) as fh:
        lines = [l for l in fh.read().splitlines() if l.strip()]
    with_missing = sum("?" in l.split(",") for l in lines)
    assert len(lines) == 699 and with_missing == 16
    ds = ingest.load_csv(wbc_path, IngestConfig.wbc())
    assert ds.n == 699 - with_missing == 683
    assert ds.d == 9
    assert len(ds.dropped_rows) == 16
    assert not np.isnan(ds.features).any()


def test_wbc_column_mean_keeps_all_rows(wbc_path):
    raw = ingest.load_csv(wbc_path, IngestConfig.wbc(imputation="column_mean"))
    assert raw.n == 699
    assert len(raw.imputed_cells) == 16
    assert {k for _, k in raw.imputed_cells} == {5}   # bare nuclei


def test_column_mean_preserves_min_max(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("1,?,0\n4,7,1\n2,3,0\n9,5,1\n")
    ds = ingest.load_csv(path, IngestConfig(label_column=-1, imputation="column_mean"))
    assert ds.features[0, 1] == pytest.approx(5.0)
    assert ds.features[:, 1].min() == 3 and ds.features[:, 1].max() == 7


def test_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(IngestError, match="no records"):
        ingest.load_csv(path, IngestConfig())


def test_inconsistent_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,0\n1,2\n")
    with pytest.raises(IngestError, match=":2: expected 3 columns"):
        ingest.load_csv(path, IngestConfig())


def test_unknown_label(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,X\n")
    with pytest.raises(IngestError, match="unknown label token 'X'"):
        ingest.load_csv(path, IngestConfig())


def test_unreadable(tmp_path):
    with pytest.raises(IngestError, match="cannot read"):
        ingest.load_csv(tmp_path / "missing.csv", IngestConfig())


def test_id_equals_label_rejected():
    with pytest.raises(IngestError):
        IngestConfig(id_column=0, label_column=0)


@pytest.mark.parametrize("column, expected", [
    ([2, 4, 6], [0, 0.5, 1]),
    ([5, 5, 5], [0, 0, 0]),
    ([0, 0.25, 1], [0, 0.25, 1]),
])
def test_normalize_columns(column, expected):
    out = ingest.normalize(_ds(np.array(column, dtype=float)[:, None]))
    np.testing.assert_allclose(out.features[:, 0], expected)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, min_side=2, max_side=12),
                  elements=st.floats(-1e6, 1e6)))
def test_normalize_properties(x):
    once = ingest.normalize(_ds(x))
    assert once.features.min() >= 0 and once.features.max() <= 1
    for c in range(x.shape[1]):
        col = once.features[:, c]
        if np.ptp(x[:, c]) > 0:
            assert col.min() == 0 and col.max() == 1
        else:
            assert not col.any()
    twice = ingest.normalize(once)
    np.testing.assert_array_equal(twice.features, once.features)


def test_split_sizes_wdbc(wdbc_path):
    # round(0.2*569) = 114 test; round(0.2*455) = 91 validation; 364 train
    ds = ingest.split(ingest.normalize(ingest.load_csv(wdbc_path, IngestConfig.wdbc())), seed=3)
    counts = {t: int(np.sum(ds.split_tags == t)) for t in ingest.SPLITS}
    assert counts == {"test": 114, "validation": 91, "train": 364}


def test_split_deterministic(wdbc_path):
    ds = ingest.normalize(ingest.load_csv(wdbc_path, IngestConfig.wdbc()))
    a, b = ingest.split(ds, 11), ingest.split(ds, 11)
    np.testing.assert_array_equal(a.split_tags, b.split_tags)
    assert not np.array_equal(a.split_tags, ingest.split(ds, 12).split_tags)


def test_split_small_stratified():
    ds = ingest.split(_ds(np.zeros((10, 2)), [0] * 5 + [1] * 5), seed=0)
    for tag in ingest.SPLITS:
        assert set(ds.labels[ds.split_tags == tag]) == {0, 1}


def test_split_preconditions():
    with pytest.raises(ValueError, match="at least 10"):
        ingest.split(_ds(np.zeros((9, 1))), 0)
    with pytest.raises(ValueError, match="only 2 members"):
        ingest.split(_ds(np.zeros((12, 1)), [0] * 10 + [1] * 2), 0)
    with pytest.raises(ValueError, match="both classes"):
        ingest.split(_ds(np.zeros((12, 1)), [0] * 12), 0)


@settings(max_examples=80, deadline=None)
@given(n0=st.integers(3, 300), n1=st.integers(3, 300), seed=st.integers(0, 2**31))
def test_split_stratification_property(n0, n1, seed):
    n = n0 + n1
    if n < 10:
        return
    labels = np.array([0] * n0 + [1] * n1)
    ds = ingest.split(_ds(np.zeros((n, 1)), labels), seed)
    n_test = int(np.floor(0.2 * n + 0.5))
    n_val = int(np.floor(0.2 * (n - n_test) + 0.5))
    sizes = {t: int(np.sum(ds.split_tags == t)) for t in ingest.SPLITS}
    assert sizes == {"test": n_test, "validation": n_val, "train": n - n_test - n_val}
    for tag in ingest.SPLITS:
        members = labels[ds.split_tags == tag]
        expected = members.size * n1 / n
        assert abs(int(members.sum()) - expected) <= 1


def test_manifest_roundtrip(tmp_path, wbc_path):
    ds = ingest.load_dataset(wbc_path, IngestConfig.wbc(seed=5))
    ingest.write_manifest(ds, tmp_path / "m.jsonl")
    rows = ingest.read_manifest(tmp_path / "m.jsonl")
    assert len(rows) == 683
    assert rows[0].keys() == {"index", "label", "split"}
    assert [r["split"] for r in rows] == list(ds.split_tags)
    ingest.write_features(ds, tmp_path / "f.csv")
    names, x = ingest.read_features(tmp_path / "f.csv")
    assert names == ds.feature_names
    np.testing.assert_array_equal(x, ds.features)


def test_dataset_is_immutable(wbc_path):
    ds = ingest.load_dataset(wbc_path, IngestConfig.wbc())
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0
