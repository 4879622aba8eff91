"""Optimal measures of degree n by determinant ascent on a candidate set.

Three schedules are available:

``multiplicative``
    mu_i <- mu_i K(x_i) / N, monotone in log det but slow near the optimum.
``exchange``
    Wolfe-Atwood vertex steps: mass towards the Christoffel argmax or away
    from the worst support point, whichever has the larger first-order gain.
``hybrid`` (default)
    Per iteration one vertex-exchange step, a sweep of pairwise exchanges
    between nearest support neighbours, then one multiplicative step; once
    the Kiefer-Wolfowitz gap is below tolerance the weights are polished by
    a projected Newton iteration restricted to the support.

The loop runs in an orthonormal basis of the weighted candidate matrix
rather than in monomials; log det is mapped back with the change-of-basis
law, and the reported log det comes from :func:`measures.gram`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .measures import (
    SUPPORT_THRESHOLD,
    AdmissibleWeight,
    ChristoffelField,
    DegenerateMeasureError,
    DiscreteMeasure,
    check_admissible,
    christoffel,
    factor_rows,
    gram,
)
from .poly_basis import GradedBasis, PointSet, vandermonde

log = logging.getLogger(__name__)

ALGORITHMS = ("multiplicative", "exchange", "hybrid")

#: Weight above which a point must satisfy the support certificate.
SUPPORT_CERT_WEIGHT = 1e-8
STALL_WINDOW = 100
STALL_RTOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6
    max_iterations: int = 5000
    algorithm: str = "hybrid"
    prune_threshold: float = 1e-12

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")


@dataclass(frozen=True)
class DesignResult:
    measure: DiscreteMeasure
    kw_gap: float
    log_det: float
    iterations: int
    trace: tuple = field(repr=False)
    converged: bool
    n: int = 0
    weight: AdmissibleWeight | None = field(default=None, repr=False)

    @property
    def support_indices(self) -> np.ndarray:
        return self.measure.support

    @property
    def weights(self) -> np.ndarray:
        return self.measure.weights


# ---------------------------------------------------------------------------
# single steps on public types
# ---------------------------------------------------------------------------

def _check_field(measure: DiscreteMeasure, fld: ChristoffelField) -> np.ndarray:
    k = np.asarray(fld.values, dtype=float)
    if k.shape != measure.weights.shape:
        raise ValueError("Christoffel field must be evaluated on the measure's candidate set")
    return k


def multiplicative_step(measure: DiscreteMeasure, fld: ChristoffelField) -> DiscreteMeasure:
    """mu_i <- mu_i K(x_i) / N, where N = integral of K against mu."""
    k = _check_field(measure, fld)
    new = measure.weights * k
    total = new.sum()
    if not total > 0:
        raise DegenerateMeasureError("Christoffel function vanishes on the support")
    return DiscreteMeasure(measure.candidates, new / total)


def exchange_step(measure: DiscreteMeasure, fld: ChristoffelField) -> DiscreteMeasure:
    """Move mass alpha towards the Christoffel argmax with the optimal step length."""
    k = _check_field(measure, fld)
    n_basis = float(np.dot(measure.weights, k))
    top = fld.max_value
    if top <= n_basis or top == 1.0:
        return measure
    alpha = (top / n_basis - 1.0) / (top - 1.0)
    alpha = min(max(alpha, 0.0), np.nextafter(1.0, 0.0))
    w = (1.0 - alpha) * measure.weights
    w[fld.argmax_index] += alpha
    return DiscreteMeasure(measure.candidates, w / w.sum())


def away_step(measure: DiscreteMeasure, fld: ChristoffelField) -> DiscreteMeasure:
    """Remove mass from the support point with the smallest Christoffel value."""
    k = _check_field(measure, fld)
    weights = measure.weights.copy()
    supp = np.flatnonzero(weights > 0)
    j = supp[np.argmin(k[supp])]
    n_basis = float(np.dot(weights, k))
    _apply_away(weights, k[j], j, n_basis)
    return DiscreteMeasure(measure.candidates, weights / weights.sum())


def _apply_away(weights: np.ndarray, kj: float, j: int, n_basis: float) -> float:
    if weights[j] >= 1.0:
        return 0.0
    lo = -weights[j] / (1.0 - weights[j])
    if kj <= 1.0:
        alpha = lo
    else:
        alpha = max((kj - n_basis) / (n_basis * (kj - 1.0)), lo)
    if alpha >= 0:
        return 0.0
    weights *= 1.0 - alpha
    weights[j] += alpha
    if alpha == lo:
        weights[j] = 0.0
    return alpha


# ---------------------------------------------------------------------------
# internal workspace
# ---------------------------------------------------------------------------

class _Workspace:
    """Design problem over admissible candidates in a well-conditioned basis."""

    def __init__(self, basis: GradedBasis, candidates: PointSet, weight: AdmissibleWeight,
                 mask: np.ndarray):
        self.N = basis.N
        self.index = np.flatnonzero(mask)
        pts = candidates.subset(self.index)
        rows = weight.scale(basis.n)[self.index][:, None] * vandermonde(basis, pts)
        q, r = np.linalg.qr(rows, mode="reduced")
        # log det G_mono = log det G_internal + 2 log|det R|
        self.offset = 2.0 * float(np.log(np.abs(np.diag(r))).sum())
        self.u = np.ascontiguousarray(q)
        self.points = pts.points

    def factor(self, mu: np.ndarray):
        supp = mu > SUPPORT_THRESHOLD
        rows = np.sqrt(mu[supp])[:, None] * self.u[supp]
        _, logdet, coeffs = factor_rows(rows, self.N)
        if coeffs is None:
            raise DegenerateMeasureError("iterate became degenerate")
        w = self.u @ coeffs
        kvals = (w.real ** 2 + w.imag ** 2).sum(axis=1)
        return logdet, w, kvals

    def logdet(self, mu: np.ndarray) -> float:
        supp = mu > SUPPORT_THRESHOLD
        rows = np.sqrt(mu[supp])[:, None] * self.u[supp]
        return factor_rows(rows, self.N)[1]


def _pair_exchange(mu, ginv, w, j, k):
    """Optimal transfer of mass from point k to point j; updates mu and returns new ginv."""
    wj, wk = w[j], w[k]
    gj = ginv @ wj.conj()
    gk = ginv @ wk.conj()
    a = float(np.real(wj @ gj))
    b = float(np.real(wk @ gk))
    c = float(abs(wj @ gk) ** 2)
    den = a * b - c
    if a == b:
        return ginv
    if den > 1e-14 * a * b:
        delta = (a - b) / (2.0 * den)
    else:
        delta = np.inf if a > b else -np.inf
    delta = min(max(delta, -mu[j]), mu[k])
    if delta == 0:
        return ginv
    mu[j] += delta
    mu[k] -= delta
    if mu[k] <= SUPPORT_THRESHOLD:
        mu[k] = 0.0
    if mu[j] <= SUPPORT_THRESHOLD:
        mu[j] = 0.0
    for s, v in ((delta, wj), (-delta, wk)):
        u = ginv @ v.conj()
        ginv = ginv - s * np.outer(u, v @ ginv) / (1.0 + s * (v @ u))
    return ginv


def _nearest_pairs(points: np.ndarray, supp: np.ndarray):
    if supp.size < 2:
        return []
    p = points[supp]
    dist = (np.abs(p[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(dist, np.inf)
    nb = np.argmin(dist, axis=1)
    pairs = []
    seen = set()
    for a, b in enumerate(nb):
        key = (min(a, b), max(a, b))
        if key not in seen:
            seen.add(key)
            pairs.append((supp[key[0]], supp[key[1]]))
    return pairs


def _cocktail_step(ws: _Workspace, mu: np.ndarray, w: np.ndarray, kvals: np.ndarray) -> np.ndarray:
    mu = mu.copy()
    ginv = np.eye(ws.N, dtype=np.complex128)
    supp = np.flatnonzero(mu > 0)
    j = int(np.argmax(kvals))
    k = int(supp[np.argmin(kvals[supp])])
    if j != k:
        ginv = _pair_exchange(mu, ginv, w, j, k)
    for a, b in _nearest_pairs(ws.points, np.flatnonzero(mu > 0)):
        if mu[a] <= 0 or mu[b] <= 0:
            continue
        ka = float(np.real(w[a] @ ginv @ w[a].conj()))
        kb = float(np.real(w[b] @ ginv @ w[b].conj()))
        if ka >= kb:
            ginv = _pair_exchange(mu, ginv, w, a, b)
        else:
            ginv = _pair_exchange(mu, ginv, w, b, a)
    kc = np.einsum("ij,jk,ik->i", w, ginv, w.conj()).real
    mu = mu * kc
    mu /= mu.sum()
    mu[mu < SUPPORT_THRESHOLD] = 0.0
    return mu / mu.sum()


def _exchange_iter(mu: np.ndarray, kvals: np.ndarray, n_basis: int) -> np.ndarray:
    mu = mu.copy()
    supp = np.flatnonzero(mu > 0)
    j = int(np.argmax(kvals))
    k = int(supp[np.argmin(kvals[supp])])
    top, low = kvals[j], kvals[k]
    if top / n_basis - 1.0 >= 1.0 - low / n_basis:
        if top > n_basis and top != 1.0:
            alpha = (top / n_basis - 1.0) / (top - 1.0)
            mu *= 1.0 - alpha
            mu[j] += alpha
    else:
        _apply_away(mu, low, k, n_basis)
    mu[mu < SUPPORT_THRESHOLD] = 0.0
    return mu / mu.sum()


def _newton_polish(ws: _Workspace, mu: np.ndarray, max_iter: int = 60) -> np.ndarray:
    """Projected Newton ascent of log det over the simplex, restricted to near-support points."""
    n_basis = ws.N
    logdet, w, kvals = ws.factor(mu)
    for _ in range(max_iter):
        free = np.flatnonzero((mu > 0) | (kvals > n_basis * (1 + 1e-12)))
        while True:
            wf = w[free]
            cross = wf @ wf.conj().T
            hess = -np.abs(cross) ** 2
            m = free.size
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = hess
            kkt[:m, m] = -1.0
            kkt[m, :m] = 1.0
            rhs = np.concatenate([-kvals[free], [0.0]])
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            d = sol[:m]
            blocked = (mu[free] == 0) & (d < 0)
            if not blocked.any():
                break
            free = free[~blocked]
        if free.size == 0 or np.max(np.abs(d)) < 1e-16:
            break
        neg = d < 0
        alpha_max = np.min(mu[free][neg] / -d[neg]) if neg.any() else np.inf
        alpha = min(1.0, alpha_max)
        improved = False
        for _ in range(40):
            trial = mu.copy()
            trial[free] += alpha * d
            if alpha == alpha_max:
                trial[free[neg][np.argmin(mu[free][neg] / -d[neg])]] = 0.0
            trial = np.clip(trial, 0.0, None)
            trial[trial < SUPPORT_THRESHOLD] = 0.0
            trial /= trial.sum()
            try:
                new_logdet = ws.logdet(trial)
            except DegenerateMeasureError:
                new_logdet = -np.inf
            if new_logdet >= logdet - 1e-15 * max(1.0, abs(logdet)):
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
        step = np.max(np.abs(trial - mu))
        mu = trial
        logdet, w, kvals = ws.factor(mu)
        on = mu > 0
        if step < 1e-15 or (np.max(np.abs(kvals[on] - n_basis)) <= 1e-12 * n_basis
                            and kvals.max() - n_basis <= 1e-12 * n_basis):
            break
    return mu


def _certificate_ok(mu, kvals, n_basis, tol) -> bool:
    gap = kvals.max() - n_basis
    heavy = mu > SUPPORT_CERT_WEIGHT
    if gap > tol * n_basis:
        return False
    return bool(np.all(np.abs(kvals[heavy] - n_basis) <= 10 * tol * n_basis))


def solve_optimal(candidates: PointSet, weight: AdmissibleWeight, basis: GradedBasis,
                  config: SolverConfig | None = None) -> DesignResult:
    config = SolverConfig() if config is None else config
    mask = check_admissible(basis, candidates, weight)
    ws = _Workspace(basis, candidates, weight, mask)
    n_basis = basis.N
    mu = np.full(ws.index.size, 1.0 / ws.index.size)
    trace = []
    history = []
    last_prune = -STALL_WINDOW
    converged = False
    it = 0
    best = None
    while True:
        logdet, w, kvals = ws.factor(mu)
        gap = float(kvals.max() - n_basis)
        total = logdet + ws.offset
        trace.append((it, total, gap))
        history.append(total)
        if best is None or gap < best[1]:
            best = (mu, gap)
        if _certificate_ok(mu, kvals, n_basis, config.tolerance):
            converged = True
            break
        if it >= config.max_iterations:
            break
        if (it - last_prune >= STALL_WINDOW and it >= STALL_WINDOW
                and history[-1] - history[-1 - STALL_WINDOW] < STALL_RTOL * max(1.0, abs(total))):
            pruned = np.where(mu < config.prune_threshold, 0.0, mu)
            if pruned.sum() > 0 and np.count_nonzero(pruned) < np.count_nonzero(mu):
                log.debug("iteration %d: stalled, pruning %d points", it,
                          np.count_nonzero(mu) - np.count_nonzero(pruned))
                mu = pruned / pruned.sum()
            last_prune = it
        if config.algorithm == "multiplicative":
            mu = mu * kvals
            mu /= mu.sum()
        elif config.algorithm == "exchange":
            mu = _exchange_iter(mu, kvals, n_basis)
        else:
            mu = _cocktail_step(ws, mu, w, kvals)
        it += 1
    if not converged:
        mu = best[0]
    elif config.algorithm == "hybrid":
        polished = _newton_polish(ws, mu)
        _, _, kp = ws.factor(polished)
        if _certificate_ok(polished, kp, n_basis, config.tolerance) and \
                ws.logdet(polished) >= ws.logdet(mu) - 1e-13 * max(1.0, abs(logdet)):
            mu = polished
    full = np.zeros(len(candidates))
    full[ws.index] = mu
    full[full < SUPPORT_THRESHOLD] = 0.0
    full /= full.sum()
    measure = DiscreteMeasure(candidates, full)
    _, w, kvals = ws.factor(full[ws.index])
    gap = float(kvals.max() - n_basis)
    fact = gram(basis, measure, weight)
    log.info("degree %d: %d iterations, gap %.3e, converged=%s", basis.n, it, gap, converged)
    return DesignResult(
        measure=measure,
        kw_gap=gap,
        log_det=fact.log_det,
        iterations=it,
        trace=tuple(trace),
        converged=converged,
        n=basis.n,
        weight=weight,
    )


def kw_certificate(result: DesignResult, fine_mesh: PointSet, weight: AdmissibleWeight,
                   basis: GradedBasis) -> float:
    """max K_n - N over an independent mesh; ``weight`` is tabulated on ``fine_mesh``."""
    cand_weight = result.weight
    if cand_weight is None:
        raise ValueError("result carries no candidate weight")
    fact = gram(basis, result.measure, cand_weight)
    return christoffel(fact, basis, fine_mesh, weight).max_value - basis.N
