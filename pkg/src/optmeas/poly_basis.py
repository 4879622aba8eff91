"""Graded monomial bases in d complex variables, evaluation and Vandermonde matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
import scipy.linalg

from . import kernels

#: Largest basis dimension we are willing to materialise.
MAX_BASIS_SIZE = 1_000_000

#: Relative pivot size below which a square system counts as singular.
SINGULAR_RTOL = 1e-13


class BasisSizeError(ValueError):
    """Requested (d, n) gives a basis too large to build."""


@dataclass(frozen=True)
class MultiIndex:
    exponents: tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.exponents):
            raise ValueError(f"negative exponent in {self.exponents}")

    @property
    def total_degree(self) -> int:
        return sum(self.exponents)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(tuple(a + b for a, b in zip(self.exponents, other.exponents)))


def _compositions(total: int, parts: int):
    """All exponent tuples of length ``parts`` summing to ``total``, lex-descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class GradedBasis:
    """Monomials z^alpha with |alpha| <= n, graded then lexicographic (z1 > z2 > ...)."""

    d: int
    n: int
    indices: tuple[MultiIndex, ...] = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.indices)

    @property
    def m_n(self) -> int:
        """Sum of the degrees of the basis monomials, d*n*N/(d+1)."""
        return sum(ix.total_degree for ix in self.indices)

    @cached_property
    def exponents(self) -> np.ndarray:
        arr = np.array([ix.exponents for ix in self.indices], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    def position(self, exponents) -> int:
        """Column of the monomial with the given exponent tuple."""
        return self.indices.index(MultiIndex(tuple(int(e) for e in exponents)))


def basis_size(d: int, n: int) -> int:
    return comb(d + n, n)


def graded_basis(d: int, n: int) -> GradedBasis:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    size = basis_size(d, n)
    if size > MAX_BASIS_SIZE:
        raise BasisSizeError(
            f"basis of degree {n} in {d} variables has {size} elements (limit {MAX_BASIS_SIZE})"
        )
    indices = tuple(
        MultiIndex(e) for deg in range(n + 1) for e in _compositions(deg, d)
    )
    basis = GradedBasis(d=d, n=n, indices=indices)
    # closed form, exact in integers
    assert basis.N == size
    assert basis.m_n * (d + 1) == d * n * size
    return basis


@dataclass(frozen=True)
class PointSet:
    """Finite set of points in C^d stored as an (M, d) complex array."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.complex128)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, indices, label: str | None = None) -> "PointSet":
        return PointSet(self.points[np.asarray(indices, dtype=np.int64)],
                        self.label if label is None else label)

    def is_real(self) -> bool:
        return bool(np.all(self.points.imag == 0))


def interval_grid(a: float, b: float, count: int) -> PointSet:
    return PointSet(np.linspace(a, b, count), label=f"interval({a},{b},{count})")


def polar_grid(radial: int, angular: int) -> PointSet:
    """Radii k/radial (k = 1..radial) times angles 2*pi*j/angular in the unit disk."""
    r = np.arange(1, radial + 1) / radial
    theta = 2 * np.pi * np.arange(angular) / angular
    z = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    return PointSet(z, label=f"disk({radial},{angular})")


def evaluate_basis(basis: GradedBasis, point) -> np.ndarray:
    pt = np.atleast_1d(np.asarray(point, dtype=np.complex128))
    if pt.shape != (basis.d,):
        raise ValueError(f"point has {pt.size} coordinates, basis expects {basis.d}")
    return kernels.monomial_matrix(pt[None, :], basis.exponents, basis.n)[0]


def vandermonde(basis: GradedBasis, points: PointSet) -> np.ndarray:
    """Matrix with entry (j, i) = p_i(z_j)."""
    if points.d != basis.d:
        raise ValueError(f"points live in C^{points.d}, basis in C^{basis.d}")
    return kernels.monomial_matrix(points.points, basis.exponents, basis.n)


def log_abs_det(mat: np.ndarray) -> float:
    """log|det| via column-pivoted QR; -inf when a pivot falls below SINGULAR_RTOL."""
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"square matrix required, got {mat.shape}")
    if mat.shape[0] == 0:
        return 0.0
    r = scipy.linalg.qr(mat, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    if diag[0] == 0 or diag[-1] <= SINGULAR_RTOL * diag[0]:
        return -np.inf
    return float(np.log(diag).sum())


def log_abs_vdm(basis: GradedBasis, points: PointSet, weight=None, n: int | None = None) -> float:
    """log(|VDM(z_1..z_N)| * prod w^n(z_i)); ``weight`` is an AdmissibleWeight on ``points``."""
    if len(points) != basis.N:
        raise ValueError(f"need exactly N={basis.N} points, got {len(points)}")
    n = basis.n if n is None else n
    value = log_abs_det(vandermonde(basis, points))
    if weight is None or value == -np.inf:
        return value
    phi = np.asarray(weight.phi, dtype=float)
    if phi.shape != (len(points),):
        raise ValueError("weight is not aligned with the points")
    if np.any(np.isposinf(phi)):
        return -np.inf
    return value - n * float(phi.sum())
