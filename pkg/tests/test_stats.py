import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats as sps

from pcsibench.errors import DegenerateTableError, DegenerateVariableError, DomainError, ShapeError
from pcsibench.stats import ContingencyTable, chi_square, cramers_v, discretize_pcsi, indicator_matrix, mca


def closed_form_2x2(t):
    (a, b), (c, d) = t
    n = a + b + c + d
    return n * (a * d - b * c) ** 2 / ((a + b) * (c + d) * (a + c) * (b + d))


def burt_inertias(data):
    """Principal inertias from a brute-force eigendecomposition of the Burt matrix."""
    z, _ = indicator_matrix(data)
    b = z.T @ z
    pb = b / b.sum()
    c = pb.sum(axis=0)
    sb = (pb - np.outer(c, c)) / np.sqrt(np.outer(c, c))
    ev = np.sort(np.linalg.eigvalsh(sb))[::-1]
    return ev[ev > 1e-10]


class TestChiSquare:
    def test_independent(self):
        res = chi_square([[10, 10], [10, 10]])
        assert res.statistic == 0.0 and res.p_value == 1.0 and res.df == 1

    def test_two_by_two(self):
        res = chi_square([[10, 20], [20, 10]])
        assert res.statistic == pytest.approx(closed_form_2x2([[10, 20], [20, 10]]), rel=1e-12)
        assert res.statistic == pytest.approx(6.6667, abs=1e-4)
        assert res.p_value == pytest.approx(0.0098, abs=5e-5)
        assert res.p_value == pytest.approx(sps.chi2.sf(res.statistic, 1), rel=1e-9)

    def test_zero_row(self):
        with pytest.raises(DegenerateTableError):
            chi_square([[0, 0], [5, 5]])

    def test_rejects_bad_tables(self):
        with pytest.raises(ShapeError):
            chi_square([[1, 2, 3]])
        with pytest.raises(DomainError):
            chi_square([[1, -2], [3, 4]])
        with pytest.raises(DomainError):
            chi_square([[1.5, 2], [3, 4]])

    def test_matches_scipy_on_larger_table(self):
        t = np.array([[12, 5, 7], [3, 9, 14], [8, 8, 2]])
        res = chi_square(t)
        ref = sps.chi2_contingency(t, correction=False)
        assert res.statistic == pytest.approx(ref[0], rel=1e-12)
        assert res.p_value == pytest.approx(ref[1], rel=1e-9)
        assert res.df == ref[2]

    def test_crosstab_and_drop_empty(self):
        t = ContingencyTable.crosstab(["a", "b", "a", "b"], [1, 1, 2, 2])
        assert t.counts.tolist() == [[1, 1], [1, 1]] and t.row_labels == ("a", "b")
        full = ContingencyTable(np.array([[3, 0, 1], [0, 0, 0], [2, 0, 4]]), "xyz", "uvw").drop_empty()
        assert full.counts.tolist() == [[3, 1], [2, 4]]
        assert full.row_labels == ("x", "z") and full.col_labels == ("u", "w")


class TestCramersV:
    def test_independent(self):
        assert cramers_v([[10, 10], [10, 10]]) == 0.0

    def test_perfect(self):
        assert cramers_v([[10, 0], [0, 10]]) == pytest.approx(1.0)

    def test_hand_formula(self):
        assert cramers_v([[10, 20], [20, 10]]) == pytest.approx(math.sqrt(6.6667 / 60), abs=1e-4)
        assert cramers_v([[10, 20], [20, 10]]) == pytest.approx(1 / 3, abs=1e-12)


tables = arrays(np.int64, st.tuples(st.integers(2, 4), st.integers(2, 4)), elements=st.integers(1, 40))


@given(tables, st.randoms(use_true_random=False))
def test_chi_square_permutation_invariant(t, rnd):
    rows = list(range(t.shape[0]))
    cols = list(range(t.shape[1]))
    rnd.shuffle(rows)
    rnd.shuffle(cols)
    a, b = chi_square(t), chi_square(t[rows][:, cols])
    assert b.statistic == pytest.approx(a.statistic, rel=1e-12, abs=1e-12)
    assert b.p_value == pytest.approx(a.p_value, rel=1e-9, abs=1e-15)


@given(tables, st.integers(2, 9))
def test_cramers_v_scale_invariant(t, k):
    v = cramers_v(t)
    assert 0.0 <= v <= 1.0
    assert cramers_v(t * k) == pytest.approx(v, rel=1e-9, abs=1e-12)


class TestMca:
    def test_total_inertia_two_binary(self, rng):
        data = rng.integers(0, 2, size=(25, 2))
        assert mca(data).total_inertia == pytest.approx(1.0, abs=1e-12)

    def test_total_inertia_identity(self, rng):
        data = np.column_stack([rng.integers(0, 3, 40), rng.integers(0, 4, 40), rng.integers(0, 2, 40)])
        z, _ = indicator_matrix(data)
        assert mca(data).total_inertia == pytest.approx(z.shape[1] / 3 - 1, abs=1e-12)

    def test_identical_variables_single_axis(self):
        col = [0, 1, 0, 1, 1, 0]
        res = mca(np.column_stack([col, col]))
        assert res.explained_inertia == pytest.approx([1.0])
        oracle = burt_inertias(np.column_stack([col, col]))
        assert oracle / oracle.sum() == pytest.approx([1.0])

    def test_balanced_independent(self):
        data = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
        res = mca(data)
        assert res.explained_inertia == pytest.approx([0.5, 0.5], abs=1e-12)
        assert burt_inertias(data) == pytest.approx(res.singular_values ** 2, abs=1e-12)

    def test_matches_burt_and_numpy(self, rng):
        data = rng.integers(0, 3, size=(30, 3))
        res = mca(data)
        assert res.singular_values ** 2 == pytest.approx(burt_inertias(data), abs=1e-10)
        z, _ = indicator_matrix(data)
        p = z / z.sum()
        r, c = p.sum(1), p.sum(0)
        s = np.linalg.svd((p - np.outer(r, c)) / np.sqrt(np.outer(r, c)), compute_uv=False)
        assert res.singular_values == pytest.approx(s[: res.singular_values.size], abs=1e-10)
        assert res.total_inertia == pytest.approx(float(np.sum(s ** 2)), abs=1e-12)

    def test_n_axes_truncates_coordinates_only(self, rng):
        data = rng.integers(0, 3, size=(30, 3))
        full, cut = mca(data), mca(data, n_axes=2)
        assert cut.row_coords.shape == (30, 2)
        assert cut.col_coords == pytest.approx(full.col_coords[:, :2])
        assert cut.explained_inertia == pytest.approx(full.explained_inertia)

    def test_constant_variable_named(self):
        with pytest.raises(DegenerateVariableError, match="'vaccine'"):
            mca([[0, 1], [1, 1], [0, 1]], names=["gender", "vaccine"])

    def test_categories(self):
        res = mca([["a", "x"], ["b", "y"], ["a", "y"]], names=["u", "v"])
        assert res.categories == (("u", "a"), ("u", "b"), ("v", "x"), ("v", "y"))


categorical = arrays(np.int64, st.tuples(st.integers(4, 25), st.integers(2, 4)), elements=st.integers(0, 2)).filter(
    lambda d: all(len(set(d[:, q])) > 1 for q in range(d.shape[1]))
)


@given(categorical)
def test_mca_row_coords_weighted_mean_zero(data):
    res = mca(data)
    # each row carries mass 1/n in the indicator matrix
    assert np.abs(res.row_coords.mean(axis=0)).max() < 1e-9


@given(categorical, st.integers(2, 3))
def test_mca_invariant_under_row_duplication(data, times):
    a = mca(data)
    b = mca(np.tile(data, (times, 1)))
    assert b.total_inertia == pytest.approx(a.total_inertia, abs=1e-9)
    assert b.singular_values == pytest.approx(a.singular_values, abs=1e-9)
    # coordinates are only unique on axes whose inertia is not repeated
    sv = a.singular_values
    gap = np.diff(np.concatenate([[np.inf], sv, [-np.inf]]))
    simple = (np.abs(gap[:-1]) > 1e-6) & (np.abs(gap[1:]) > 1e-6)
    assert b.col_coords[:, simple] == pytest.approx(a.col_coords[:, simple], abs=1e-9)
    assert b.row_coords[: len(data), simple] == pytest.approx(a.row_coords[:, simple], abs=1e-9)


@pytest.mark.parametrize("value, level", [(2.4, 2), (2.5, 3), (5.0, 5), (1.0, 1), (4.49, 4)])
def test_discretize(value, level):
    assert discretize_pcsi(value) == level


def test_discretize_domain():
    with pytest.raises(DomainError):
        discretize_pcsi(5.01)
