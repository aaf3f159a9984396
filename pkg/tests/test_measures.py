import math

import numpy as np
import pytest

from swest.exceptions import DataParseError, DimensionMismatch, EmptyInput, NonFiniteInput, OutOfRange
from swest.measures import (
    EmpiricalMeasure,
    ProjectionSet,
    SortedSample1D,
    cdf,
    interp_quantile,
    make_measure,
    project,
    project_sorted,
    quantile,
    read_csv_measure,
)


class TestEmpiricalMeasure:
    def test_two_points(self):
        mu = make_measure([[0, 0], [1, 1]])
        assert (mu.n, mu.d) == (2, 2)

    def test_single_point(self):
        mu = make_measure([[3]])
        assert (mu.n, mu.d) == (1, 1)

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteInput):
            make_measure([[0, np.nan]])

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            EmpiricalMeasure(np.zeros((0, 2)))

    def test_points_are_read_only(self):
        mu = make_measure([[1.0, 2.0]])
        with pytest.raises(ValueError):
            mu.points[0, 0] = 5.0

    def test_copy_isolated_from_source(self):
        src = np.array([[1.0, 2.0]])
        mu = make_measure(src)
        src[0, 0] = 9.0
        assert mu.points[0, 0] == 1.0


class TestProject:
    def test_axis_projection(self):
        np.testing.assert_array_equal(project([[0, 0], [1, 1]], [1, 0]).values, [0, 1])

    def test_single_point(self):
        np.testing.assert_array_equal(project([[1, 2]], [0, 1]).values, [2])

    def test_diagonal(self):
        u = np.array([1, 1]) / math.sqrt(2)
        np.testing.assert_allclose(project([[1, 0], [0, 1]], u).values, [1 / math.sqrt(2)] * 2, atol=1e-15)

    def test_non_unit_direction(self):
        with pytest.raises(ValueError):
            project([[1, 2]], [1, 1])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            project([[1, 2]], [1, 0, 0])

    def test_vectorized_matches_scalar(self, rng):
        pts = rng.normal(size=(30, 4))
        dirs = rng.normal(size=(5, 4))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        rows = project_sorted(pts, dirs)
        for l in range(5):
            np.testing.assert_allclose(rows[l], project(pts, dirs[l]).values, rtol=0, atol=1e-13)


class TestProjectionSet:
    def test_unit_norm_enforced(self):
        with pytest.raises(ValueError):
            ProjectionSet([[1.0, 1e-5]])

    def test_shape(self):
        ps = ProjectionSet(np.eye(3))
        assert (ps.L, ps.d) == (3, 3)


class TestQuantile:
    def test_midpoint(self):
        assert quantile(SortedSample1D([0, 10]), 0.5) == 5

    def test_max_endpoint(self):
        assert quantile(SortedSample1D([1, 2, 3]), 1) == 3

    def test_interior(self):
        # position 0.75 * 2 = 1.5, halfway between 1 and 4
        assert quantile(SortedSample1D([0, 1, 4]), 0.75) == pytest.approx(2.5, abs=1e-15)

    def test_singleton(self):
        assert quantile(SortedSample1D([7.0]), 0.3) == 7.0

    @pytest.mark.parametrize("t", [-0.1, 1.1, np.nan])
    def test_out_of_range(self, t):
        with pytest.raises(OutOfRange):
            quantile(SortedSample1D([0, 1]), t)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            SortedSample1D([2, 1])

    def test_vectorized_rows(self):
        rows = np.array([[0.0, 1.0, 2.0], [10.0, 20.0, 30.0]])
        t = np.array([[0.25, 1.0], [0.5, 0.0]])
        np.testing.assert_allclose(interp_quantile(rows, t), [[0.5, 2.0], [20.0, 10.0]])


class TestCdf:
    def test_midpoint(self):
        assert cdf(SortedSample1D([0, 10]), 5) == 0.5

    def test_clamp_below(self):
        assert cdf(SortedSample1D([0, 10]), -1) == 0

    def test_clamp_above(self):
        assert cdf(SortedSample1D([0, 10]), 11) == 1

    def test_inverse_of_quantile_example(self):
        assert cdf(SortedSample1D([0, 1, 4]), 2.5) == pytest.approx(0.75, abs=1e-15)

    def test_ties_take_highest_level(self):
        assert cdf(SortedSample1D([0, 1, 1, 2]), 1.0) == pytest.approx(2 / 3)

    def test_singleton_atom(self):
        s = SortedSample1D([3.0])
        assert [cdf(s, 2.0), cdf(s, 3.0), cdf(s, 4.0)] == [0.0, 0.5, 1.0]

    def test_round_trip(self, rng):
        s = SortedSample1D.from_unsorted(rng.normal(size=50))
        t = rng.uniform(size=200)
        np.testing.assert_allclose(cdf(s, quantile(s, t)), t, atol=1e-12)


class TestCsv:
    def test_reads_rows(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("1,2\n3.5,-4e-1\n\n")
        mu = read_csv_measure(f)
        np.testing.assert_array_equal(mu.points, [[1, 2], [3.5, -0.4]])

    def test_reports_bad_row(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("1,2\n3,abc\n")
        with pytest.raises(DataParseError) as info:
            read_csv_measure(f)
        assert info.value.row == 2

    def test_ragged(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("1,2\n3\n")
        with pytest.raises(DataParseError, match="row 2"):
            read_csv_measure(f)

    def test_nan_entry(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("1,nan\n")
        with pytest.raises(DataParseError):
            read_csv_measure(f)
