"""Fekete and Leja point families, Lagrange bases, Lebesgue constants and Fejer sums."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import kernels
from .measures import AdmissibleWeight, DiscreteMeasure, point_measure
from .poly_basis import (
    GradedBasis,
    PointSet,
    SINGULAR_RTOL,
    log_abs_det,
    log_abs_vdm,
    vandermonde,
)

#: Largest number of N-subsets the brute-force search will enumerate.
MAX_SUBSETS = 10**6


class SearchTooLargeError(ValueError):
    """Brute-force enumeration would exceed MAX_SUBSETS."""


class DegenerateSequenceError(ValueError):
    """No remaining candidate gives a nonzero Vandermonde increment."""


class SingularNodesError(ValueError):
    """Interpolation nodes are not unisolvent for the basis."""


@dataclass(frozen=True)
class PointFamily:
    kind: str
    points: PointSet
    log_weighted_vdm: float
    n: int
    indices: tuple[int, ...] = ()
    candidates: PointSet | None = field(default=None, repr=False)
    increments: tuple[float, ...] = ()


def _rowlog(weight: AdmissibleWeight | None, n: int, size: int) -> np.ndarray:
    if weight is None:
        return np.zeros(size)
    if len(weight) != size:
        raise ValueError("weight is not aligned with the candidate set")
    return weight.logscale(n)


def brute_force_fekete(candidates: PointSet, weight: AdmissibleWeight | None,
                       basis: GradedBasis) -> PointFamily:
    """Exhaustive maximiser of the weighted Vandermonde modulus over N-subsets."""
    total = comb(len(candidates), basis.N)
    if total > MAX_SUBSETS:
        raise SearchTooLargeError(
            f"C({len(candidates)}, {basis.N}) = {total} subsets exceeds {MAX_SUBSETS}; use leja_sequence"
        )
    vmat = vandermonde(basis, candidates)
    _, idx = kernels.best_subset(vmat, _rowlog(weight, basis.n, len(candidates)))
    pts = candidates.subset(idx, label="fekete")
    sub_weight = None if weight is None else weight.subset(idx)
    return PointFamily(
        kind="fekete_bruteforce",
        points=pts,
        log_weighted_vdm=log_abs_vdm(basis, pts, sub_weight),
        n=basis.n,
        indices=idx,
        candidates=candidates,
    )


def log_abs_vdm_prefix(basis: GradedBasis, points: PointSet, weight: AdmissibleWeight | None = None) -> float:
    """log|det[p_i(z_j)]| over the first m basis elements for m points, times prod w^n."""
    m = len(points)
    if m > basis.N:
        raise ValueError(f"{m} points exceed the basis size {basis.N}")
    value = log_abs_det(vandermonde(basis, points)[:, :m])
    if weight is not None and value > -np.inf:
        if np.any(np.isposinf(weight.phi)):
            return -np.inf
        value -= basis.n * float(weight.phi.sum())
    return value


def _leja_start(candidates: PointSet, weight: AdmissibleWeight | None, n: int) -> int:
    # maximise w^n, then |x|, then the lexicographically largest coordinates
    logw = _rowlog(weight, n, len(candidates))
    pts = candidates.points
    keys = [pts[:, k].imag for k in range(candidates.d - 1, -1, -1)]
    keys += [pts[:, k].real for k in range(candidates.d - 1, -1, -1)]
    keys += [np.linalg.norm(pts, axis=1), logw]
    return int(np.lexsort(keys)[-1])


def leja_sequence(candidates: PointSet, weight: AdmissibleWeight | None, basis: GradedBasis,
                  count: int | None = None) -> PointFamily:
    """Greedy weighted Leja points.

    Each new point maximises the modulus of the next Schur-complement pivot
    of the weighted candidate Vandermonde matrix, which equals the ratio of
    consecutive weighted Vandermonde determinants.
    """
    count = basis.N if count is None else int(count)
    if not 1 <= count <= basis.N:
        raise ValueError(f"count must be in [1, {basis.N}], got {count}")
    logw = _rowlog(weight, basis.n, len(candidates))
    scale = np.where(np.isfinite(logw), np.exp(np.where(np.isfinite(logw), logw, 0.0)), 0.0)
    vmat = vandermonde(basis, candidates)
    wmat = scale[:, None] * vmat
    first = _leja_start(candidates, weight, basis.n)
    chosen, pivots = kernels.leja_eliminate(wmat, first, count)
    col_scale = np.abs(wmat[:, :count]).max(axis=0)
    for k in range(count):
        if chosen[k] < 0 or pivots[k] <= SINGULAR_RTOL * col_scale[k]:
            raise DegenerateSequenceError(
                f"no candidate increases the Vandermonde determinant at step {k + 1}"
            )
    idx = tuple(int(i) for i in chosen)
    increments = tuple(float(v) for v in np.log(pivots))
    pts = candidates.subset(idx, label="leja")
    if count == basis.N:
        sub_weight = None if weight is None else weight.subset(idx)
        logvdm = log_abs_vdm(basis, pts, sub_weight)
    else:
        logvdm = float(np.sum(increments))
    return PointFamily(
        kind="leja",
        points=pts,
        log_weighted_vdm=logvdm,
        n=basis.n,
        indices=idx,
        candidates=candidates,
        increments=increments,
    )


def truncate_family(family: PointFamily, basis: GradedBasis) -> PointFamily:
    """Prefix of a (Leja) family of length N for a lower degree basis."""
    if basis.N > len(family.points):
        raise ValueError("family is shorter than the requested basis")
    idx = family.indices[: basis.N]
    pts = PointSet(family.points.points[: basis.N], family.points.label)
    return PointFamily(
        kind=family.kind,
        points=pts,
        log_weighted_vdm=log_abs_vdm(basis, pts),
        n=basis.n,
        indices=idx,
        candidates=family.candidates,
        increments=family.increments[: basis.N],
    )


def fekete_measure(family: PointFamily) -> DiscreteMeasure:
    """Equal weights 1/N on the family's points, on the generating candidate set if known."""
    if family.candidates is not None and family.indices:
        return point_measure(family.candidates, family.indices)
    return point_measure(family.points, np.arange(len(family.points)))


@dataclass(frozen=True)
class LagrangeBasis:
    nodes: PointSet
    coefficients: np.ndarray
    basis: GradedBasis = field(repr=False)

    def evaluate(self, points: PointSet) -> np.ndarray:
        """Matrix with entry (k, i) = l_i(z_k)."""
        return vandermonde(self.basis, points) @ self.coefficients


def lagrange_basis(nodes: PointSet, basis: GradedBasis) -> LagrangeBasis:
    if len(nodes) != basis.N:
        raise ValueError(f"need N={basis.N} nodes, got {len(nodes)}")
    vmat = vandermonde(basis, nodes)
    if log_abs_det(vmat) == -np.inf:
        raise SingularNodesError("nodes are not unisolvent for the polynomial space")
    coeffs = np.linalg.solve(vmat, np.eye(basis.N, dtype=np.complex128))
    return LagrangeBasis(nodes=nodes, coefficients=coeffs, basis=basis)


def _sums(lb: LagrangeBasis, mesh: PointSet):
    if len(mesh) == 0:
        raise ValueError("mesh is empty")
    return kernels.lagrange_sums(vandermonde(lb.basis, mesh), lb.coefficients)


def lebesgue_constant(lb: LagrangeBasis, mesh: PointSet) -> float:
    """max over the mesh of sum_k |l_k|."""
    return float(_sums(lb, mesh)[0].max())


def fejer_sum(lb: LagrangeBasis, mesh: PointSet) -> float:
    """max over the mesh of sum_k |l_k|^2."""
    return float(_sums(lb, mesh)[1].max())


def lagrange_sup_norms(lb: LagrangeBasis, mesh: PointSet) -> np.ndarray:
    """Mesh sup-norm of each fundamental Lagrange polynomial."""
    return np.asarray(_sums(lb, mesh)[2])


def interpolate(lb: LagrangeBasis, node_values, points: PointSet) -> np.ndarray:
    return lb.evaluate(points) @ np.asarray(node_values, dtype=np.complex128)


def lebesgue_growth_diagnostic(families, mesh: PointSet, basis_for=None):
    """Rows (n, Lambda_n, Lambda_n^(1/n)) for a sequence of families; report only.

    ``basis_for`` maps a family to its GradedBasis; by default the basis of
    the family's degree in the dimension of its points.
    """
    from .poly_basis import graded_basis

    rows = []
    for fam in families:
        basis = basis_for(fam) if basis_for else graded_basis(fam.points.d, fam.n)
        lam = lebesgue_constant(lagrange_basis(fam.points, basis), mesh)
        root = lam ** (1.0 / fam.n) if fam.n > 0 else float("nan")
        rows.append((fam.n, lam, root))
    return rows
