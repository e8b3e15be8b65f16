import numpy as np
import pytest

from mmdpsi.data import SampleSet, load_samples, save_samples
from mmdpsi.errors import ConfigError, DataError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestSampleSet:
    def test_shape_and_names(self):
        ss = SampleSet(np.zeros((2, 5)), ("a", "b"))
        assert ss.n_features == 2 and ss.n_samples == 5
        assert ss.feature(1).feature_names == ("b",)
        assert ss.feature(1).values.shape == (1, 5)

    def test_default_names(self):
        ss = SampleSet(np.zeros((3, 2)))
        assert ss.feature_names == ("f0", "f1", "f2")

    def test_name_count_mismatch(self):
        with pytest.raises(DataError):
            SampleSet(np.zeros((2, 2)), ("only_one",))

    def test_take_columns(self):
        ss = SampleSet(np.arange(8.0).reshape(2, 4), ("u", "v"))
        sub = ss.take([0, 2])
        assert sub.values.tolist() == [[0.0, 2.0], [4.0, 6.0]]
        assert sub.feature_names == ("u", "v")


class TestLoadSamples:
    def test_roundtrip_preserves_names_and_values(self, tmp_path):
        ss = SampleSet(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]), ("p", "q"))
        path = tmp_path / "s.csv"
        save_samples(ss, path)
        back = load_samples(path)
        assert back.feature_names == ("p", "q")
        assert np.array_equal(back.values, ss.values)
        assert back.values.shape == (2, 3)

    def test_three_rows_two_columns(self, tmp_path):
        path = write(tmp_path, "t.csv", "a,b\n1,2\n3,4\n5,6\n")
        ss = load_samples(path)
        assert ss.n_features == 2 and ss.n_samples == 3
        assert ss.values[0].tolist() == [1.0, 3.0, 5.0]

    def test_labeled_single_file(self, tmp_path):
        path = write(
            tmp_path, "l.csv",
            "a,b,grp\n1,2,0\n3,4,1\n5,6,0\n7,8,1\n",
        )
        X, Y = load_samples(path, "labeled_single_file", "grp")
        assert X.feature_names == Y.feature_names == ("a", "b")
        assert X.n_samples == Y.n_samples == 2
        assert X.values[0].tolist() == [1.0, 5.0]
        assert Y.values[0].tolist() == [3.0, 7.0]

    def test_nan_cell_reports_position(self, tmp_path):
        path = write(tmp_path, "n.csv", "a,b\n1,NaN\n")
        with pytest.raises(DataError, match="row 2, column 2"):
            load_samples(path)

    def test_non_numeric_cell_reports_position(self, tmp_path):
        path = write(tmp_path, "x.csv", "a,b\n1,2\n3,oops\n")
        with pytest.raises(DataError, match="row 3, column 2"):
            load_samples(path)

    def test_ragged_row(self, tmp_path):
        path = write(tmp_path, "r.csv", "a,b\n1,2\n3\n")
        with pytest.raises(DataError, match="row 3"):
            load_samples(path)

    def test_empty_file(self, tmp_path):
        path = write(tmp_path, "e.csv", "")
        with pytest.raises(DataError, match="empty"):
            load_samples(path)

    def test_header_only(self, tmp_path):
        path = write(tmp_path, "h.csv", "a,b\n")
        with pytest.raises(DataError, match="no data rows"):
            load_samples(path)

    def test_unknown_label_value(self, tmp_path):
        path = write(tmp_path, "u.csv", "a,grp\n1,0\n2,2\n")
        with pytest.raises(DataError, match="unknown label"):
            load_samples(path, "labeled_single_file", "grp")

    def test_missing_label_column(self, tmp_path):
        path = write(tmp_path, "m.csv", "a,b\n1,2\n")
        with pytest.raises(DataError, match="label column"):
            load_samples(path, "labeled_single_file", "grp")
        with pytest.raises(ConfigError):
            load_samples(path, "labeled_single_file", None)

    def test_unknown_layout(self, tmp_path):
        path = write(tmp_path, "k.csv", "a\n1\n")
        with pytest.raises(ConfigError):
            load_samples(path, "columns")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_samples(tmp_path / "absent.csv")
