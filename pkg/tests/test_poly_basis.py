import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optmeas.formats import read_points_csv, write_points_csv
from optmeas.measures import AdmissibleWeight
from optmeas.poly_basis import (
    BasisSizeError,
    MultiIndex,
    PointSet,
    basis_size,
    evaluate_basis,
    graded_basis,
    log_abs_vdm,
    vandermonde,
)


@pytest.mark.parametrize("d,n,N,m", [(1, 2, 3, 3), (2, 2, 6, 8), (3, 0, 1, 0), (2, 1, 3, 2)])
def test_graded_basis_sizes(d, n, N, m):
    b = graded_basis(d, n)
    assert b.N == N
    assert b.m_n == m
    assert len(b.indices) == N


def test_graded_basis_order_univariate():
    b = graded_basis(1, 2)
    assert [ix.exponents for ix in b.indices] == [(0,), (1,), (2,)]


def test_graded_basis_degree_monotone_and_lex():
    b = graded_basis(2, 3)
    degs = [ix.total_degree for ix in b.indices]
    assert degs == sorted(degs)
    assert [ix.exponents for ix in b.indices[1:3]] == [(1, 0), (0, 1)]
    assert len(set(ix.exponents for ix in b.indices)) == b.N


def test_graded_basis_size_guard():
    with pytest.raises(BasisSizeError):
        graded_basis(6, 400)


@pytest.mark.parametrize("d,n", [(0, 1), (1, -1)])
def test_graded_basis_rejects_bad_arguments(d, n):
    with pytest.raises(ValueError):
        graded_basis(d, n)


def test_multi_index_invariants():
    a = MultiIndex((1, 2))
    assert a.total_degree == 3
    assert (a + MultiIndex((0, 4))).exponents == (1, 6)
    with pytest.raises(ValueError):
        MultiIndex((1, -1))


def test_m_n_closed_form_for_all_small_bases():
    # every (d, n) with N <= 1e4: degree sum equals d n N/(d+1) in integers
    checked = 0
    for d in range(1, 7):
        n = 0
        while basis_size(d, n) <= 10**4:
            N = basis_size(d, n)
            assert N == comb(d + n, n)
            # sum of total degrees over all monomials of degree <= n
            degree_sum = sum(k * comb(k + d - 1, d - 1) for k in range(n + 1))
            assert degree_sum * (d + 1) == d * n * N
            if N <= 2000:
                assert graded_basis(d, n).m_n == degree_sum
            checked += 1
            n += 1
    assert checked > 50


@pytest.mark.parametrize(
    "d,n,point,expected",
    [
        (1, 2, [2.0], [1, 2, 4]),
        (2, 1, [1j, 0.0], [1, 1j, 0]),
        (3, 2, [0, 0, 0], [1] + [0] * 9),
    ],
)
def test_evaluate_basis_examples(d, n, point, expected):
    np.testing.assert_allclose(evaluate_basis(graded_basis(d, n), point), expected)


def test_evaluate_basis_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate_basis(graded_basis(2, 1), [1.0])


@pytest.mark.parametrize(
    "nodes,n,det",
    [([-1, 1], 1, 2.0), ([-1, 0, 1], 2, 2.0), ([-1, -1, 1], 2, 0.0)],
)
def test_vandermonde_determinants(nodes, n, det):
    v = vandermonde(graded_basis(1, n), PointSet(np.array(nodes, dtype=float)))
    assert abs(abs(np.linalg.det(v)) - det) < 1e-12


def test_log_abs_vdm_examples():
    b = graded_basis(1, 2)
    pts = PointSet([-1.0, 0.0, 1.0])
    assert log_abs_vdm(b, pts) == pytest.approx(np.log(2), abs=1e-14)
    assert log_abs_vdm(b, PointSet([0.5, 0.5, 1.0])) == -np.inf
    assert log_abs_vdm(b, pts, AdmissibleWeight(np.zeros(3))) == log_abs_vdm(b, pts)


def test_log_abs_vdm_weighted_and_zero_weight():
    b = graded_basis(1, 1)
    pts = PointSet([-1.0, 1.0])
    phi = AdmissibleWeight([0.25, 0.5])
    assert log_abs_vdm(b, pts, phi) == pytest.approx(np.log(2) - 0.75)
    assert log_abs_vdm(b, pts, AdmissibleWeight([0.0, np.inf])) == -np.inf


@pytest.mark.parametrize("N", range(2, 13))
def test_univariate_vdm_is_product_of_differences(N, rng):
    x = rng.uniform(-1, 1, N)
    expected = sum(np.log(abs(x[j] - x[i])) for i, j in itertools.combinations(range(N), 2))
    got = log_abs_vdm(graded_basis(1, N - 1), PointSet(x))
    assert abs(np.expm1(got - expected)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(
    a=st.tuples(st.integers(0, 3), st.integers(0, 3)),
    b=st.tuples(st.integers(0, 3), st.integers(0, 3)),
    x=st.tuples(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)),
)
def test_evaluate_basis_multiplicative(a, b, x):
    basis = graded_basis(2, 12)
    vals = evaluate_basis(basis, x)
    s = tuple(p + q for p, q in zip(a, b))
    lhs = vals[basis.position(s)]
    rhs = vals[basis.position(a)] * vals[basis.position(b)]
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@pytest.mark.parametrize("d,n", [(1, 5), (2, 2), (2, 3), (3, 1)])
def test_vdm_permutation_invariance(d, n, rng):
    b = graded_basis(d, n)
    pts = rng.uniform(-1, 1, (b.N, d)) + 1j * rng.uniform(-1, 1, (b.N, d))
    base = log_abs_vdm(b, PointSet(pts))
    for _ in range(5):
        perm = rng.permutation(b.N)
        assert log_abs_vdm(b, PointSet(pts[perm])) == pytest.approx(base, abs=1e-10)


def test_point_set_validation():
    with pytest.raises(ValueError):
        PointSet([[1.0, np.nan]])
    ps = PointSet([[1.0, 2.0], [3.0, 4.0]])
    assert ps.d == 2 and len(ps) == 2 and ps.is_real


def test_point_csv_round_trip(tmp_path, rng):
    pts = PointSet(rng.normal(size=(7, 2)) + 1j * rng.normal(size=(7, 2)))
    path = write_points_csv(tmp_path / "pts.csv", pts)
    assert path.read_text().splitlines()[0] == "re_1,im_1,re_2,im_2"
    back = read_points_csv(path)
    np.testing.assert_array_equal(back.points, pts.points)


def test_point_csv_requires_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        read_points_csv(p)
