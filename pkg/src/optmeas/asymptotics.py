"""Transfinite diameter estimates, the perturbation functional f_n(t), and weak-* diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, lgamma, log

import numpy as np

from .design_solver import DesignResult
from .extremal_points import PointFamily
from .measures import AdmissibleWeight, DiscreteMeasure, gram
from .poly_basis import GradedBasis, vandermonde


def _require_mn(basis: GradedBasis) -> int:
    if basis.m_n == 0:
        raise ValueError("degree 0 has m_n = 0; the normalised diameter is undefined")
    return basis.m_n


def delta_n_from_points(family: PointFamily, basis: GradedBasis) -> float:
    """(|VDM| prod w^n)^(1/m_n) for the family's points."""
    m = _require_mn(basis)
    if family.log_weighted_vdm == -np.inf:
        return 0.0
    return float(np.exp(family.log_weighted_vdm / m))


def delta_n_from_gram(result: DesignResult, basis: GradedBasis) -> float:
    """det(G_n)^(1/(2 m_n)) for a solved design in the monomial basis."""
    m = _require_mn(basis)
    if result.log_det == -np.inf:
        return 0.0
    return float(np.exp(result.log_det / (2 * m)))


@dataclass(frozen=True)
class DiameterEstimate:
    n: int
    delta_from_points: float
    delta_from_gram: float
    sandwich_lo: float
    sandwich_hi: float
    log_det: float
    log_lo: float
    log_hi: float
    points_kind: str = "fekete_bruteforce"

    def lower_holds(self, slack: float = 0.0) -> bool:
        return self.log_lo <= self.log_det + slack

    def upper_holds(self, rel_slack: float = 0.0) -> bool:
        return self.log_det <= self.log_hi + np.log1p(rel_slack)


def diameter_estimate(result: DesignResult, family: PointFamily, basis: GradedBasis) -> DiameterEstimate:
    """Both estimates plus the bounds N^-N d^(2m) <= det G <= d^(2m)/N! built from ``family``."""
    n_basis = basis.N
    two_log_vdm = 2.0 * family.log_weighted_vdm
    log_lo = two_log_vdm - n_basis * log(n_basis)
    log_hi = two_log_vdm - lgamma(n_basis + 1)
    return DiameterEstimate(
        n=basis.n,
        delta_from_points=delta_n_from_points(family, basis),
        delta_from_gram=delta_n_from_gram(result, basis),
        sandwich_lo=float(np.exp(log_lo)),
        sandwich_hi=float(np.exp(log_hi)),
        log_det=result.log_det,
        log_lo=log_lo,
        log_hi=log_hi,
        points_kind=family.kind,
    )


def vdm_square_integral(basis: GradedBasis, measure: DiscreteMeasure, weight: AdmissibleWeight) -> float:
    """Explicit N-fold sum of |VDM|^2 prod w^{2n} against mu x ... x mu.

    Cost is |support|^N determinants, so this is for tiny cases only.
    """
    supp = measure.support
    vmat = vandermonde(basis, measure.candidates.subset(supp))
    w2 = weight.scale(basis.n)[supp] ** 2
    mu = measure.weights[supp]
    total = 0.0
    for tup in itertools.product(range(supp.size), repeat=basis.N):
        idx = list(tup)
        det = np.linalg.det(vmat[idx])
        total += abs(det) ** 2 * np.prod(w2[idx]) * np.prod(mu[idx])
    return float(total)


@dataclass(frozen=True)
class PerturbationCurve:
    t_grid: np.ndarray
    f_values: np.ndarray
    u_values: np.ndarray
    measure: DiscreteMeasure = field(repr=False)
    n: int = 0
    d: int = 1


def perturbation_curve(result: DesignResult, weight: AdmissibleWeight, u_values, basis: GradedBasis,
                       t_grid) -> PerturbationCurve:
    """f_n(t) = -log det G_n(mu, w e^{-t u}) / (2 m_n) for the fixed design measure."""
    m = _require_mn(basis)
    u = np.asarray(u_values, dtype=float)
    ts = np.asarray(t_grid, dtype=float)
    f = np.empty(ts.size)
    for k, t in enumerate(ts):
        wt = weight if t == 0 else weight.perturbed(t, u)
        ld = gram(basis, result.measure, wt).log_det
        f[k] = -ld / (2 * m) if np.isfinite(ld) else np.nan
    return PerturbationCurve(t_grid=ts, f_values=f, u_values=u, measure=result.measure,
                             n=basis.n, d=basis.d)


@dataclass(frozen=True)
class DerivativeCheck:
    fd_slope: float
    formula_slope: float
    discrepancy: float
    h: float


def derivative_check(curve: PerturbationCurve, basis: GradedBasis) -> DerivativeCheck:
    """Central difference of f_n at 0 against ((d+1)/d) * integral of u."""
    ts = curve.t_grid
    zero = np.flatnonzero(ts == 0.0)
    pos = np.sort(ts[ts > 0])
    h = next((s for s in pos if np.any(ts == -s)), None)
    if zero.size == 0 or h is None:
        raise ValueError("t_grid needs 0 and a symmetric pair +-h")
    fp = curve.f_values[np.flatnonzero(ts == h)[0]]
    fm = curve.f_values[np.flatnonzero(ts == -h)[0]]
    fd = (fp - fm) / (2 * h)
    d = basis.d
    formula = (d + 1) / d * float(np.dot(curve.measure.weights, curve.u_values))
    return DerivativeCheck(fd_slope=float(fd), formula_slope=formula,
                           discrepancy=float(abs(fd - formula)), h=float(h))


@dataclass(frozen=True)
class ConcavityCheck:
    max_second_difference: float
    second_differences: np.ndarray = field(repr=False)


def concavity_check(curve: PerturbationCurve) -> ConcavityCheck:
    ok = np.isfinite(curve.f_values)
    ts, f = curve.t_grid[ok], curve.f_values[ok]
    if ts.size < 3:
        raise ValueError("need at least 3 finite samples")
    steps = np.diff(ts)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ValueError("t_grid must be equally spaced")
    second = f[2:] - 2 * f[1:-1] + f[:-2]
    return ConcavityCheck(max_second_difference=float(second.max()), second_differences=second)


@dataclass(frozen=True)
class ReferenceMeasure:
    kind: str
    moments: np.ndarray  # moments[a, b] = integral of z^a conj(z)^b

    def moment(self, a: int, b: int) -> complex:
        return self.moments[a, b]

    @property
    def external_oracle(self) -> bool:
        """True for references taken from classical potential theory rather than derived here."""
        return self.kind == "uniform_circle"


REFERENCE_KINDS = ("arcsine_interval", "uniform_circle")


def reference_equilibrium(kind: str, max_order: int = 16) -> ReferenceMeasure:
    if kind not in REFERENCE_KINDS:
        raise ValueError(f"unsupported reference measure {kind!r}; choose from {REFERENCE_KINDS}")
    mom = np.zeros((max_order + 1, max_order + 1), dtype=np.complex128)
    for a in range(max_order + 1):
        for b in range(max_order + 1):
            if kind == "arcsine_interval":
                k = a + b
                mom[a, b] = comb(k, k // 2) / 4 ** (k // 2) if k % 2 == 0 else 0.0
            elif a == b:
                mom[a, b] = 1.0
    return ReferenceMeasure(kind=kind, moments=mom)


def measure_moment(measure: DiscreteMeasure, a: int, b: int, coordinate: int = 0) -> complex:
    z = measure.candidates.points[:, coordinate]
    return complex(np.dot(measure.weights, z ** a * np.conj(z) ** b))


@dataclass(frozen=True)
class ConvergenceReport:
    degrees: tuple[int, ...]
    moment_indices: tuple[tuple[int, int], ...]
    moment_errors: np.ndarray
    mass_outside_region: np.ndarray
    reference_label: str
    radius: float

    def error(self, a: int, b: int) -> np.ndarray:
        return self.moment_errors[:, self.moment_indices.index((a, b))]


def convergence_report(designs, reference: ReferenceMeasure, max_order: int = 4,
                       radius: float = 0.95) -> ConvergenceReport:
    """Moment errors |int z^a conj(z)^b dmu_n - reference| per degree, plus mass at |z| >= radius."""
    if max_order >= reference.moments.shape[0]:
        raise ValueError("reference table is shorter than max_order")
    indices = tuple((a, b) for a in range(max_order + 1) for b in range(max_order + 1 - a))
    errors = np.zeros((len(designs), len(indices)))
    outside = np.zeros(len(designs))
    for r, res in enumerate(designs):
        meas = res.measure
        if meas.candidates.d != 1:
            raise ValueError("reference measures are univariate")
        for c, (a, b) in enumerate(indices):
            errors[r, c] = abs(measure_moment(meas, a, b) - reference.moment(a, b))
        z = meas.candidates.points[:, 0]
        outside[r] = float(meas.weights[np.abs(z) >= radius].sum())
    label = reference.kind + (" (classical external oracle)" if reference.external_oracle else "")
    return ConvergenceReport(
        degrees=tuple(res.n for res in designs),
        moment_indices=indices,
        moment_errors=errors,
        mass_outside_region=outside,
        reference_label=label,
        radius=radius,
    )
