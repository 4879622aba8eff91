import numpy as np
import pytest

from optmeas.extremal_points import (
    DegenerateSequenceError,
    PointFamily,
    SearchTooLargeError,
    SingularNodesError,
    brute_force_fekete,
    fejer_sum,
    fekete_measure,
    interpolate,
    lagrange_basis,
    lagrange_sup_norms,
    lebesgue_constant,
    lebesgue_growth_diagnostic,
    leja_sequence,
    log_abs_vdm_prefix,
    truncate_family,
)
from optmeas.measures import (
    AdmissibleWeight,
    bernstein_markov_factor,
    constant_weight,
    gaussian_weight,
    gram,
    weighted_inner_product,
)
from optmeas.poly_basis import PointSet, graded_basis, interval_grid, log_abs_vdm, polar_grid

GRID5 = interval_grid(-1, 1, 5)


def _real(ps):
    return ps.points[:, 0].real.tolist()


@pytest.mark.parametrize("n,expected", [(1, [-1.0, 1.0]), (2, [-1.0, 0.0, 1.0])])
def test_brute_force_fekete_examples(n, expected):
    fam = brute_force_fekete(GRID5, constant_weight(GRID5), graded_basis(1, n))
    assert _real(fam.points) == expected
    assert fam.kind == "fekete_bruteforce"
    assert fam.log_weighted_vdm == pytest.approx(log_abs_vdm(graded_basis(1, n), fam.points))


def test_brute_force_fekete_degree_zero():
    fam = brute_force_fekete(GRID5, None, graded_basis(1, 0))
    assert fam.indices == (0,)
    assert fam.log_weighted_vdm == 0.0


def test_brute_force_fekete_guard():
    with pytest.raises(SearchTooLargeError):
        brute_force_fekete(interval_grid(-1, 1, 201), None, graded_basis(1, 4))


def test_brute_force_fekete_weighted_matches_enumeration():
    import itertools

    grid = interval_grid(-2, 2, 9)
    w = gaussian_weight(grid, 0.7)
    b = graded_basis(1, 2)
    best = max(itertools.combinations(range(9), 3),
               key=lambda idx: log_abs_vdm(b, grid.subset(idx), w.subset(idx)))
    assert brute_force_fekete(grid, w, b).indices == best


def test_leja_examples():
    grid = interval_grid(-1, 1, 201)
    fam = leja_sequence(grid, constant_weight(grid), graded_basis(1, 4), count=3)
    assert _real(fam.points) == [1.0, -1.0, 0.0]
    assert len(fam.increments) == 3


def test_leja_gaussian_pulls_points_inward():
    grid = interval_grid(-1, 1, 201)
    fam = leja_sequence(grid, gaussian_weight(grid, 1.0), graded_basis(1, 1))
    x = np.array(_real(fam.points))
    assert np.all(np.abs(x) < 1.0)
    assert x[0] == 0.0
    assert abs(x[1]) == pytest.approx(0.71, abs=0.011)


def test_leja_degenerate_raises():
    pts = PointSet([[0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(DegenerateSequenceError):
        leja_sequence(pts, None, graded_basis(2, 1))


def test_leja_count_bounds():
    with pytest.raises(ValueError):
        leja_sequence(GRID5, None, graded_basis(1, 1), count=3)


@pytest.mark.parametrize("d,n,grid", [
    (1, 8, interval_grid(-1, 1, 101)),
    (1, 4, polar_grid(5, 16)),
])
def test_leja_greedy_consistency(d, n, grid, rng):
    w = AdmissibleWeight(rng.uniform(0, 0.3, len(grid)))
    b = graded_basis(d, n)
    fam = leja_sequence(grid, w, b)
    prev = 0.0
    for m in range(1, b.N + 1):
        sub = fam.points.subset(range(m))
        cur = log_abs_vdm_prefix(b, sub, w.subset(fam.indices[:m]))
        assert fam.increments[m - 1] == pytest.approx(cur - prev, abs=1e-8)
        prev = cur
    assert fam.log_weighted_vdm == pytest.approx(sum(fam.increments), abs=1e-8)


def test_leja_greedy_choice_is_maximal():
    grid = interval_grid(-1, 1, 41)
    b = graded_basis(1, 5)
    fam = leja_sequence(grid, None, b)
    for m in range(1, b.N):
        chosen = fam.points.subset(range(m))
        best = max(log_abs_vdm_prefix(b, PointSet(np.vstack([chosen.points, grid.points[[j]]])))
                   for j in range(len(grid)))
        assert fam.increments[m] + sum(fam.increments[:m]) == pytest.approx(best, abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_fekete_dominates_leja(n, rng):
    for grid in (interval_grid(-1, 1, 15), polar_grid(2, 7)):
        w = AdmissibleWeight(rng.uniform(0, 0.3, len(grid)))
        b = graded_basis(1, n)
        fek = brute_force_fekete(grid, w, b)
        lej = leja_sequence(grid, w, b)
        assert fek.log_weighted_vdm >= lej.log_weighted_vdm - 1e-12


def test_truncate_family():
    grid = interval_grid(-1, 1, 41)
    fam = leja_sequence(grid, None, graded_basis(1, 6))
    short = truncate_family(fam, graded_basis(1, 3))
    assert short.indices == fam.indices[:4]
    assert short.log_weighted_vdm == pytest.approx(sum(fam.increments[:4]))


def test_fekete_measure_examples():
    fam = brute_force_fekete(GRID5, None, graded_basis(1, 1))
    mu = fekete_measure(fam)
    np.testing.assert_allclose(mu.weights, [0.5, 0, 0, 0, 0.5])
    fam3 = brute_force_fekete(GRID5, None, graded_basis(1, 2))
    np.testing.assert_allclose(fekete_measure(fam3).weights[[0, 2, 4]], 1 / 3)
    fact = gram(graded_basis(1, 1), mu, constant_weight(GRID5))
    assert np.exp(fact.log_det) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("d,n", [(1, 2), (1, 5), (2, 2)])
def test_det_gram_vdm_identity(d, n, rng):
    b = graded_basis(d, n)
    for _ in range(5):
        pts = PointSet(rng.uniform(-1, 1, (b.N, d)) + 1j * rng.uniform(-1, 1, (b.N, d)))
        w = AdmissibleWeight(rng.uniform(0, 0.5, b.N))
        fam = PointFamily("custom", pts, log_abs_vdm(b, pts, w), n, tuple(range(b.N)), pts)
        lhs = gram(b, fekete_measure(fam), w).log_det
        rhs = -b.N * np.log(b.N) + 2 * fam.log_weighted_vdm
        assert abs(np.expm1(lhs - rhs)) <= 1e-8


def test_lagrange_examples():
    nodes = PointSet([-1.0, 1.0])
    lb = lagrange_basis(nodes, graded_basis(1, 1))
    np.testing.assert_allclose(lb.coefficients, [[0.5, 0.5], [-0.5, 0.5]])
    x = interval_grid(-1, 1, 7)
    vals = lb.evaluate(x)
    xr = x.points[:, 0].real
    np.testing.assert_allclose(vals[:, 0], (1 - xr) / 2, atol=1e-15)
    np.testing.assert_allclose(vals[:, 1], (1 + xr) / 2, atol=1e-15)


def test_lagrange_singular_nodes():
    with pytest.raises(SingularNodesError):
        lagrange_basis(PointSet([0.0, 0.0]), graded_basis(1, 1))
    with pytest.raises(ValueError):
        lagrange_basis(PointSet([0.0]), graded_basis(1, 1))


@pytest.mark.parametrize("d,n", [(1, 1), (1, 6), (2, 2), (2, 3)])
def test_cardinality_and_equal_weight_orthonormality(d, n, rng):
    b = graded_basis(d, n)
    nodes = PointSet(rng.uniform(-1, 1, (b.N, d)) + 1j * rng.uniform(-1, 1, (b.N, d)))
    lb = lagrange_basis(nodes, b)
    vals = lb.evaluate(nodes)
    np.testing.assert_allclose(vals, np.eye(b.N), atol=1e-8)
    fam = PointFamily("custom", nodes, 0.0, n, tuple(range(b.N)), nodes)
    mu = fekete_measure(fam)
    w = constant_weight(nodes)
    q = np.sqrt(b.N) * vals
    for i in range(b.N):
        for j in range(b.N):
            ip = weighted_inner_product(q[:, i], q[:, j], mu, w, n)
            assert abs(ip - (i == j)) <= 1e-8


def test_lebesgue_examples():
    mesh = interval_grid(-1, 1, 10001)
    lb = lagrange_basis(PointSet([-1.0, 1.0]), graded_basis(1, 1))
    assert lebesgue_constant(lb, mesh) == pytest.approx(1.0, abs=1e-14)
    equi = lagrange_basis(interval_grid(-1, 1, 11), graded_basis(1, 10))
    assert lebesgue_constant(equi, mesh) > 29


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_fekete_lebesgue_bound_on_candidates(n):
    grid = interval_grid(-1, 1, 21)
    b = graded_basis(1, n)
    fam = brute_force_fekete(grid, None, b)
    lb = lagrange_basis(fam.points, b)
    assert np.all(lagrange_sup_norms(lb, grid) <= 1 + 1e-6)
    assert lebesgue_constant(lb, grid) <= b.N + 1e-5


def test_fejer_examples(grid201):
    lb = lagrange_basis(PointSet([-1.0, 1.0]), graded_basis(1, 1))
    assert fejer_sum(lb, grid201) == pytest.approx(1.0)
    single = lagrange_basis(PointSet([0.3]), graded_basis(1, 0))
    assert fejer_sum(single, grid201) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_fejer_matches_christoffel_of_equal_weight_measure(n, rng):
    grid = interval_grid(-1, 1, 301)
    b = graded_basis(1, n)
    idx = np.sort(rng.choice(len(grid), b.N, replace=False))
    nodes = grid.subset(idx)
    lb = lagrange_basis(nodes, b)
    fam = PointFamily("custom", nodes, 0.0, n, tuple(int(i) for i in idx), grid)
    w = constant_weight(grid)
    bm = bernstein_markov_factor(gram(b, fekete_measure(fam), w), b, grid, w)
    assert b.N * fejer_sum(lb, grid) == pytest.approx(bm ** 2, rel=1e-8)


def test_interpolation_operator_norm(rng):
    mesh = interval_grid(-1, 1, 2001)
    b = graded_basis(1, 7)
    nodes = interval_grid(-1, 1, 8)
    lb = lagrange_basis(nodes, b)
    lam = lebesgue_constant(lb, mesh)
    x = mesh.points[:, 0].real
    xn = nodes.points[:, 0].real
    for _ in range(20):
        a, f, ph = rng.normal(size=3)
        fn = lambda t: a * np.sin(3 * f * t + ph) + np.abs(t - ph / 4)
        vals = interpolate(lb, fn(xn), mesh)
        assert np.abs(vals).max() <= lam * np.abs(fn(x)).max() + 1e-8


def test_growth_diagnostic_fekete_families():
    grid = interval_grid(-1, 1, 21)
    mesh = interval_grid(-1, 1, 10001)
    fams = [brute_force_fekete(grid, None, graded_basis(1, n)) for n in (1, 2, 4, 8)]
    rows = lebesgue_growth_diagnostic(fams, mesh)
    assert rows[0][1] == pytest.approx(rows[0][2])
    roots = [r[2] for r in rows[1:]]
    assert all(r > 1 for r in roots)
    assert roots[-1] < min(roots[:-1])


def test_growth_diagnostic_leja_prefixes():
    grid = interval_grid(-1, 1, 201)
    fam = leja_sequence(grid, None, graded_basis(1, 12))
    fams = [truncate_family(fam, graded_basis(1, n)) for n in (2, 4, 8, 12)]
    rows = lebesgue_growth_diagnostic(fams, grid)
    assert [r[0] for r in rows] == [2, 4, 8, 12]
    assert all(np.isfinite(r[1]) and r[1] > 0 and np.isfinite(r[2]) for r in rows)
