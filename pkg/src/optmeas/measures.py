"""Discrete measures, admissible weights, weighted Gram matrices and Christoffel functions.

Conventions
-----------
The weighted inner product of degree n is

    <f, g> = sum_i f(x_i) conj(g(x_i)) exp(-2 n phi_i) mu_i

and ``gram[i, j] = <p_i, p_j>``.  Writing B for the matrix with rows
``sqrt(mu_i) exp(-n phi_i) P(x_i)^T`` this is ``gram = B^T conj(B)``.  A thin
QR factorisation B = QR gives ``q_j = sum_i C[i, j] p_i`` orthonormal with
C = R^{-1}, so ``C^T gram conj(C) = I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .poly_basis import GradedBasis, PointSet, SINGULAR_RTOL, vandermonde

#: Candidate weights below this are treated as zero mass.
SUPPORT_THRESHOLD = 1e-14


class DegenerateMeasureError(ValueError):
    """The measure does not define an inner product on the polynomial space."""


class AdmissibilityError(ValueError):
    """The weight/candidate pair cannot carry a nondegenerate measure."""


@dataclass(frozen=True)
class AdmissibleWeight:
    """phi = -log w tabulated on a point set; +inf encodes w = 0."""

    phi: np.ndarray
    label: str = ""

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float).ravel()
        if np.any(np.isnan(phi)) or np.any(np.isneginf(phi)):
            raise ValueError("phi must be > -inf everywhere (w finite)")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    def __len__(self):
        return self.phi.size

    def logscale(self, n: int) -> np.ndarray:
        """log of w^n per point, with -inf where w vanishes."""
        out = np.full(self.phi.shape, -np.inf)
        ok = np.isfinite(self.phi)
        out[ok] = -n * self.phi[ok]
        return out

    def scale(self, n: int) -> np.ndarray:
        """w^n per point, computed from phi in the log domain."""
        out = np.zeros(self.phi.shape)
        ok = np.isfinite(self.phi)
        out[ok] = np.exp(-n * self.phi[ok])
        return out

    def subset(self, indices) -> "AdmissibleWeight":
        return AdmissibleWeight(self.phi[np.asarray(indices, dtype=np.int64)], self.label)

    def perturbed(self, t: float, u_values) -> "AdmissibleWeight":
        """Weight w * exp(-t u), i.e. phi + t u."""
        u = np.asarray(u_values, dtype=float)
        phi = np.where(np.isfinite(self.phi), self.phi + t * u, np.inf)
        return AdmissibleWeight(phi, f"{self.label}+{t:g}u")


def _sq_modulus(points: PointSet) -> np.ndarray:
    return (np.abs(points.points) ** 2).sum(axis=1)


def constant_weight(points: PointSet) -> AdmissibleWeight:
    return AdmissibleWeight(np.zeros(len(points)), "constant")


def gaussian_weight(points: PointSet, c: float) -> AdmissibleWeight:
    """phi = c |z|^2."""
    return AdmissibleWeight(c * _sq_modulus(points), f"gaussian({c:g})")


def power_weight(points: PointSet, a: float) -> AdmissibleWeight:
    """phi = a log(1 + |z|^2)."""
    return AdmissibleWeight(a * np.log1p(_sq_modulus(points)), f"power({a:g})")


def weight_by_name(name: str, points: PointSet, param: float | None = None) -> AdmissibleWeight:
    if name == "constant":
        return constant_weight(points)
    if name == "gaussian":
        return gaussian_weight(points, 1.0 if param is None else param)
    if name == "power":
        return power_weight(points, 1.0 if param is None else param)
    raise ValueError(f"unknown weight generator {name!r}")


def check_admissible(basis: GradedBasis, candidates: PointSet, weight: AdmissibleWeight) -> np.ndarray:
    """Full-rank surrogate for admissibility; returns the mask of candidates with w > 0."""
    if len(weight) != len(candidates):
        raise ValueError("weight is not aligned with the candidate set")
    mask = np.isfinite(weight.phi)
    if mask.sum() < basis.N:
        raise AdmissibilityError(
            f"only {int(mask.sum())} candidates with w > 0, need at least N={basis.N}"
        )
    vmat = vandermonde(basis, candidates.subset(np.flatnonzero(mask)))
    # row scaling by w^n does not change the rank, so test the plain matrix
    r = scipy.linalg.qr(vmat, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    if diag.size < basis.N or diag[basis.N - 1] <= SINGULAR_RTOL * diag[0]:
        raise AdmissibilityError(
            f"candidate Vandermonde matrix has rank < N={basis.N} (unisolvency fails)"
        )
    return mask


@dataclass(frozen=True)
class DiscreteMeasure:
    candidates: PointSet
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size != len(self.candidates):
            raise ValueError(f"{w.size} weights for {len(self.candidates)} candidates")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum():.17g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > SUPPORT_THRESHOLD)

    def integrate(self, values) -> complex:
        return complex(np.dot(self.weights, np.asarray(values)))


def uniform_measure(candidates: PointSet, mask=None) -> DiscreteMeasure:
    w = np.ones(len(candidates)) if mask is None else np.asarray(mask, dtype=float)
    return DiscreteMeasure(candidates, w / w.sum())


def point_measure(candidates: PointSet, indices) -> DiscreteMeasure:
    """Equal mass 1/k at each of the k given candidate indices."""
    w = np.zeros(len(candidates))
    idx = np.asarray(indices, dtype=np.int64)
    np.add.at(w, idx, 1.0 / idx.size)
    return DiscreteMeasure(candidates, w)


def weighted_inner_product(f_values, g_values, measure: DiscreteMeasure,
                           weight: AdmissibleWeight, n: int) -> complex:
    f = np.asarray(f_values, dtype=np.complex128)
    g = np.asarray(g_values, dtype=np.complex128)
    m = len(measure.candidates)
    if f.shape != (m,) or g.shape != (m,) or len(weight) != m:
        raise ValueError("values, weight and measure must all align with the candidate set")
    keep = (weight.scale(n) > 0) & (measure.weights > 0)
    s2 = weight.scale(n)[keep] ** 2
    return complex(np.sum(f[keep] * np.conj(g[keep]) * s2 * measure.weights[keep]))


@dataclass(frozen=True)
class GramFactorization:
    gram: np.ndarray
    log_det: float
    ortho_coeffs: np.ndarray | None
    n: int
    r_factor: np.ndarray | None = None

    @property
    def singular(self) -> bool:
        return self.ortho_coeffs is None


def factor_rows(rows: np.ndarray, n_basis: int):
    """R factor, log det(B^T conj B) and R^{-1} for a row matrix B (None if singular)."""
    if rows.shape[0] < n_basis:
        return None, -np.inf, None
    r = np.linalg.qr(rows, mode="r")
    diag = np.abs(np.diag(r))
    if diag.max() == 0 or diag.min() <= SINGULAR_RTOL * diag.max():
        return r, -np.inf, None
    log_det = 2.0 * float(np.log(diag).sum())
    coeffs = scipy.linalg.solve_triangular(r, np.eye(n_basis, dtype=r.dtype))
    return r, log_det, coeffs


def gram(basis: GradedBasis, measure: DiscreteMeasure, weight: AdmissibleWeight,
         transform: np.ndarray | None = None, n: int | None = None) -> GramFactorization:
    """Weighted Gram matrix of the basis (or of ``basis @ transform``) under the measure.

    ``transform`` has columns giving the new basis elements in monomial
    coordinates; ``n`` overrides the degree used in w^{2n}.
    """
    n = basis.n if n is None else n
    if len(weight) != len(measure.candidates):
        raise ValueError("weight is not aligned with the candidate set")
    supp = np.flatnonzero((measure.weights > SUPPORT_THRESHOLD) & np.isfinite(weight.phi))
    vmat = vandermonde(basis, measure.candidates.subset(supp))
    if transform is not None:
        vmat = vmat @ np.asarray(transform, dtype=np.complex128)
    rows = (np.sqrt(measure.weights[supp]) * weight.scale(n)[supp])[:, None] * vmat
    g = rows.T @ rows.conj()
    r, log_det, coeffs = factor_rows(rows, basis.N)
    return GramFactorization(gram=g, log_det=log_det, ortho_coeffs=coeffs, n=n, r_factor=r)


@dataclass(frozen=True)
class ChristoffelField:
    values: np.ndarray
    max_value: float
    argmax_index: int

    @classmethod
    def from_values(cls, values) -> "ChristoffelField":
        v = np.asarray(values, dtype=float)
        k = int(np.argmax(v))  # first maximiser: lowest index wins ties
        return cls(values=v, max_value=float(v[k]), argmax_index=k)


def _require_nonsingular(fact: GramFactorization):
    if fact.singular:
        raise DegenerateMeasureError("measure is degenerate on the polynomial space (singular Gram)")


def christoffel(fact: GramFactorization, basis: GradedBasis, eval_points: PointSet,
                weight: AdmissibleWeight) -> ChristoffelField:
    """K_n(x) = sum_j |q_j(x)|^2 w(x)^{2n} on ``eval_points`` (weight aligned with them)."""
    _require_nonsingular(fact)
    if len(weight) != len(eval_points):
        raise ValueError("weight is not aligned with the evaluation points")
    vmat = vandermonde(basis, eval_points)
    values = kernels.christoffel_sweep(vmat, fact.ortho_coeffs, weight.logscale(fact.n))
    return ChristoffelField.from_values(values)


def christoffel_via_inverse(fact: GramFactorization, basis: GradedBasis, point,
                            weight_phi: float = 0.0) -> float:
    """w^{2n} P^* G^{-1} P at one point, from the Gram matrix itself.

    Only meant as an independent check of :func:`christoffel`.
    """
    _require_nonsingular(fact)
    from .poly_basis import evaluate_basis

    if np.isposinf(weight_phi):
        return 0.0
    p = evaluate_basis(basis, point)
    try:
        sol = scipy.linalg.solve(fact.gram, p, assume_a="her")
    except scipy.linalg.LinAlgError as exc:
        raise DegenerateMeasureError(str(exc)) from exc
    return float(np.real(np.vdot(p, sol)) * np.exp(-2.0 * fact.n * weight_phi))


def bernstein_markov_factor(fact: GramFactorization, basis: GradedBasis, eval_points: PointSet,
                            weight: AdmissibleWeight) -> float:
    return float(np.sqrt(christoffel(fact, basis, eval_points, weight).max_value))
