import numpy as np
import pytest

from eotmix import io
from eotmix.bcd import FitSettings, fit
from eotmix.core import Dataset, GmmParams
from eotmix.errors import InvariantViolation, ParseError, RaggedRow, SchemaVersionMismatch
from eotmix.verify import check_variational_identities, VerificationReport


@pytest.fixture
def params(rng):
    A = rng.normal(size=(3, 3))
    return GmmParams(rng.normal(size=(2, 3)) * 1e3, A @ A.T + np.eye(3) / 7, [1 / 3, 2 / 3])


class TestDataset:
    def test_two_rows_one_feature(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x1\n0.5\n-1.25\n")
        ds = io.read_dataset(f)
        assert (ds.n, ds.dimension) == (2, 1)
        assert ds.points[:, 0].tolist() == [0.5, -1.25]
        assert ds.labels is None

    def test_label_column(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,label,b\n1,2,3\n4,1,6\n")
        ds = io.read_dataset(f)
        assert ds.labels.tolist() == [2, 1]
        assert ds.points.tolist() == [[1.0, 3.0], [4.0, 6.0]]

    def test_non_numeric_cell(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x1,x2\n1,2\n3,abc\n")
        with pytest.raises(ParseError) as exc:
            io.read_dataset(f)
        assert exc.value.row == 2
        assert exc.value.column == "x2"
        assert "row 2" in str(exc.value) and "x2" in str(exc.value)

    def test_ragged(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x1,x2\n1,2\n3\n")
        with pytest.raises(RaggedRow):
            io.read_dataset(f)

    def test_empty(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("")
        with pytest.raises(ParseError):
            io.read_dataset(f)

    def test_round_trip_exact(self, tmp_path, rng):
        ds = Dataset(rng.normal(size=(30, 2)) * 1e5, rng.integers(1, 4, size=30))
        f = tmp_path / "d.csv"
        io.write_dataset(ds, f)
        back = io.read_dataset(f)
        assert np.array_equal(back.points, ds.points)
        assert np.array_equal(back.labels, ds.labels)
        g = tmp_path / "e.csv"
        io.write_dataset(back, g)
        assert f.read_bytes() == g.read_bytes()


class TestModel:
    def test_round_trip_exact(self, tmp_path, params):
        f = tmp_path / "m.ini"
        io.write_model(params, f)
        back = io.read_model(f)
        assert np.array_equal(back.means, params.means)
        assert np.array_equal(back.covariance, params.covariance)
        assert np.array_equal(back.weights.weights, params.weights.weights)

    def test_rewrite_is_byte_identical(self, tmp_path, params):
        f, g = tmp_path / "m.ini", tmp_path / "n.ini"
        io.write_model(params, f)
        io.write_model(io.read_model(f), g)
        assert f.read_bytes() == g.read_bytes()

    def test_asymmetric_covariance(self, tmp_path, params):
        f = tmp_path / "m.ini"
        io.write_model(params, f)
        lines = f.read_text().splitlines()
        lines = [("covariance_1 = 9, 0.5, 0.25" if l.startswith("covariance_1") else l) for l in lines]
        f.write_text("\n".join(lines) + "\n")
        with pytest.raises(InvariantViolation):
            io.read_model(f)

    def test_weights_off_simplex(self, tmp_path, params):
        f = tmp_path / "m.ini"
        io.write_model(params, f)
        f.write_text(f.read_text().replace("weights = ", "weights = 0.5, 0.7 #"))
        with pytest.raises((InvariantViolation, ParseError)):
            io.read_model(f)

    def test_unknown_schema_version(self, tmp_path, params):
        f = tmp_path / "m.ini"
        io.write_model(params, f)
        f.write_text(f.read_text().replace("schema_version = 1", "schema_version = 2"))
        with pytest.raises(SchemaVersionMismatch):
            io.read_model(f)

    def test_missing_key(self, tmp_path):
        f = tmp_path / "m.ini"
        f.write_text("[model]\nschema_version = 1\ncomponents = 1\ndimension = 1\nweights = 1\n")
        with pytest.raises(ParseError):
            io.read_model(f)


def test_fit_report_round_trip(tmp_path, rng):
    report = fit(Dataset(rng.normal(size=(40, 2))), 2, FitSettings(max_sweeps=5, seed=2))
    f = tmp_path / "r.ini"
    io.write_fit_report(report, f)
    back = io.read_fit_report(f)
    assert back.nll_trajectory == report.nll_trajectory
    assert back.eot_value_trajectory == report.eot_value_trajectory
    assert back.termination_reason is report.termination_reason
    assert np.array_equal(back.final_params.means, report.final_params.means)
    g = tmp_path / "s.ini"
    io.write_fit_report(back, g)
    assert f.read_bytes() == g.read_bytes()


def test_verification_report_round_trip(tmp_path):
    report = VerificationReport(check_variational_identities(3, 2), 3, 2)
    f = tmp_path / "v.ini"
    io.write_verification_report(report, f)
    back = io.read_verification_report(f)
    assert [c.name for c in back.checks] == [c.name for c in report.checks]
    assert [c.max_residual for c in back.checks] == [c.max_residual for c in report.checks]
    assert back.passed == report.passed


def test_atomic_write_leaves_no_temp_files(tmp_path):
    io.atomic_write_text(tmp_path / "a.txt", "hello\n")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt"]
