import numpy as np
import pytest

from semivi.datasets import LabeledDataset, load_csv, make_blobs, train_test_split
from semivi.errors import DataError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_three_row_fixture(self, tmp_path):
        path = write(tmp_path, "label,f0,f1\n0,1.5,2.0\n1,0.0,-1.0\n0,3.0,4.0\n")
        ds = load_csv(path)
        assert ds.n == 3 and ds.d == 2 and ds.K == 2
        np.testing.assert_array_equal(ds.labels, [0, 1, 0])
        np.testing.assert_allclose(ds.features[0], [1.5, 2.0])

    def test_divide_255(self, tmp_path):
        path = write(tmp_path, "label,f0\n0,0\n1,255\n0,128\n")
        ds = load_csv(path, divide_255=True)
        assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0
        assert np.isclose(ds.features[1, 0], 1.0)

    def test_standardize(self, tmp_path):
        path = write(tmp_path, "label,f0,f1\n0,1,10\n1,2,20\n0,3,30\n1,4,40\n")
        ds = load_csv(path, standardize=True)
        np.testing.assert_allclose(ds.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(ds.features.std(axis=0), 1.0, atol=1e-12)

    def test_duplicate_header_names_column(self, tmp_path):
        path = write(tmp_path, "label,f0,f0\n0,1,2\n")
        with pytest.raises(DataError, match="f0"):
            load_csv(path)

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = write(tmp_path, "label,f0,f1\n0,1.0,2.0\n1,3.0\n")
        with pytest.raises(DataError, match=":3:"):
            load_csv(path)

    def test_non_integer_label_reports_line(self, tmp_path):
        path = write(tmp_path, "label,f0\nfoo,1.0\n")
        with pytest.raises(DataError, match=":2:"):
            load_csv(path)

    def test_negative_label_rejected(self, tmp_path):
        path = write(tmp_path, "label,f0\n-1,1.0\n")
        with pytest.raises(DataError):
            load_csv(path)

    def test_non_numeric_feature(self, tmp_path):
        path = write(tmp_path, "label,f0\n0,abc\n")
        with pytest.raises(DataError, match=":2:"):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, ""))

    def test_header_only(self, tmp_path):
        with pytest.raises(DataError, match="no data rows"):
            load_csv(write(tmp_path, "label,f0\n"))


class TestLabeledDataset:
    def test_label_range_validated(self):
        with pytest.raises(DataError):
            LabeledDataset(np.zeros((2, 2)), np.array([0, 3]), 2)

    def test_nonfinite_features_rejected(self):
        with pytest.raises(DataError):
            LabeledDataset(np.array([[np.nan, 0.0]]), np.array([0]), 1)

    def test_subset(self, rng):
        ds = make_blobs(10, 3, 2, rng)
        sub = ds.subset([1, 4, 7])
        assert sub.n == 3 and sub.d == 3 and sub.K == 2
        np.testing.assert_array_equal(sub.features[0], ds.features[1])


class TestBlobsAndSplit:
    def test_blobs_shapes_and_labels(self, rng):
        ds = make_blobs(100, 5, 4, rng)
        assert ds.n == 100 and ds.d == 5 and ds.K == 4
        assert set(np.unique(ds.labels)) <= set(range(4))

    def test_blobs_classes_are_informative(self):
        # same class, same center: within-class scatter smaller than between
        rng = np.random.default_rng(0)
        ds = make_blobs(4000, 10, 3, rng, center_scale=1.0)
        mus = np.array([ds.features[ds.labels == k].mean(axis=0) for k in range(3)])
        spread = np.linalg.norm(mus[0] - mus[1])
        assert spread > 0.5

    def test_split_partitions(self, rng):
        ds = make_blobs(50, 3, 2, rng)
        train, test = train_test_split(ds, 0.2, rng)
        assert train.n + test.n == 50
        assert test.n == 10

    def test_split_fraction_validated(self, rng):
        ds = make_blobs(10, 2, 2, rng)
        with pytest.raises(ValueError):
            train_test_split(ds, 1.5, rng)
