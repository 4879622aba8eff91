"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports cleanly and the environment
variable ``OPTMEAS_NUMBA`` is not set to a false value (``0``, ``false``,
``no``, ``off``).  Both paths are always importable as ``<name>_nb`` and
``<name>_np`` so the benchmark and the test-suite can compare them.
"""

from __future__ import annotations

import itertools
import os

import numpy as np

try:
    import numba
    from numba import njit, prange
    HAS_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the system TBB is too old for numba; workqueue is always available
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f

    prange = range


def _env_enabled() -> bool:
    flag = os.environ.get("OPTMEAS_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


USE_NUMBA = HAS_NUMBA and _env_enabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# monomial evaluation
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def monomial_matrix_nb(points, exponents, degree):
    m, d = points.shape
    n_basis = exponents.shape[0]
    out = np.empty((m, n_basis), dtype=np.complex128)
    for i in prange(m):
        powers = np.empty((d, degree + 1), dtype=np.complex128)
        for k in range(d):
            powers[k, 0] = 1.0
            for j in range(1, degree + 1):
                powers[k, j] = powers[k, j - 1] * points[i, k]
        for b in range(n_basis):
            acc = powers[0, exponents[b, 0]]
            for k in range(1, d):
                acc *= powers[k, exponents[b, k]]
            out[i, b] = acc
    return out


def monomial_matrix_np(points, exponents, degree):
    m, d = points.shape
    powers = np.empty((m, d, degree + 1), dtype=np.complex128)
    powers[:, :, 0] = 1.0
    for j in range(1, degree + 1):
        powers[:, :, j] = powers[:, :, j - 1] * points
    out = powers[:, 0, exponents[:, 0]]
    for k in range(1, d):
        out = out * powers[:, k, exponents[:, k]]
    return np.ascontiguousarray(out)


# ---------------------------------------------------------------------------
# Christoffel sweep:  exp(2 s_i) * sum_j |(V C)_ij|^2
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def christoffel_sweep_nb(vmat, coeffs, logscale, upper):
    m, n_basis = vmat.shape
    out = np.zeros(m)
    for i in prange(m):
        if logscale[i] == -np.inf:
            continue
        q = np.zeros(n_basis, dtype=np.complex128)
        for k in range(n_basis):
            v = vmat[i, k]
            for j in range(k if upper else 0, n_basis):
                q[j] += v * coeffs[k, j]
        acc = 0.0
        for j in range(n_basis):
            acc += q[j].real * q[j].real + q[j].imag * q[j].imag
        out[i] = acc * np.exp(2.0 * logscale[i])
    return out


def christoffel_sweep_np(vmat, coeffs, logscale, upper):
    q = vmat @ coeffs
    vals = (q.real ** 2 + q.imag ** 2).sum(axis=1)
    scale = np.zeros_like(logscale)
    ok = np.isfinite(logscale)
    scale[ok] = np.exp(2.0 * logscale[ok])
    return vals * scale


# ---------------------------------------------------------------------------
# brute-force maximum of log|det| over N-subsets of rows
# ---------------------------------------------------------------------------

@njit(cache=True)
def _logabsdet_lu(a):
    n = a.shape[0]
    total = 0.0
    for c in range(n):
        p = c
        best = abs(a[c, c])
        for r in range(c + 1, n):
            v = abs(a[r, c])
            if v > best:
                best = v
                p = r
        if best == 0.0:
            return -np.inf
        if p != c:
            for k in range(c, n):
                tmp = a[c, k]
                a[c, k] = a[p, k]
                a[p, k] = tmp
        piv = a[c, c]
        total += np.log(best)
        for r in range(c + 1, n):
            f = a[r, c] / piv
            if f != 0:
                for k in range(c + 1, n):
                    a[r, k] -= f * a[c, k]
    return total


@njit(cache=True)
def best_subset_nb(vmat, rowlog, rel_tol):
    m, n = vmat.shape
    idx = np.arange(n)
    best_idx = idx.copy()
    best = -np.inf
    work = np.empty((n, n), dtype=np.complex128)
    while True:
        for r in range(n):
            for c in range(n):
                work[r, c] = vmat[idx[r], c]
        val = _logabsdet_lu(work)
        if val > -np.inf:
            for r in range(n):
                val += rowlog[idx[r]]
        if val > best + rel_tol * max(1.0, abs(best)) or (best == -np.inf and val > -np.inf):
            best = val
            best_idx[:] = idx
        # next combination in lexicographic order
        i = n - 1
        while i >= 0 and idx[i] == i + m - n:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        for j in range(i + 1, n):
            idx[j] = idx[j - 1] + 1
    return best, best_idx


def best_subset_np(vmat, rowlog, rel_tol, chunk=20000):
    m, n = vmat.shape
    best = -np.inf
    best_idx = np.arange(n)
    combos = itertools.combinations(range(m), n)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        block = block.reshape(-1, n)
        _, logdet = np.linalg.slogdet(vmat[block])
        logdet = logdet + rowlog[block].sum(axis=1)
        # sequential scan keeps the lexicographic tie-break identical to the loop version;
        # rows that cannot beat the best seen before this block are skipped
        floor = best + rel_tol * max(1.0, abs(best)) if best > -np.inf else -np.inf
        for k in np.flatnonzero(np.isfinite(logdet) & (logdet > floor)):
            val = logdet[k]
            if val > best + rel_tol * max(1.0, abs(best)) or best == -np.inf:
                best = val
                best_idx = block[k].copy()
    return best, best_idx


# ---------------------------------------------------------------------------
# Leja selection: Gaussian elimination with row pivoting on the weighted
# candidate Vandermonde matrix (columns in graded order)
# ---------------------------------------------------------------------------

@njit(cache=True)
def leja_eliminate_nb(vmat, first, count):
    m, n = vmat.shape
    work = vmat.copy()
    chosen = np.empty(count, dtype=np.int64)
    pivots = np.empty(count)
    active = np.ones(m, dtype=np.bool_)
    for step in range(count):
        if step == 0:
            p = first
        else:
            p = -1
            best = -1.0
            for r in range(m):
                if active[r]:
                    v = abs(work[r, step])
                    if v > best:
                        best = v
                        p = r
        chosen[step] = p
        pivots[step] = abs(work[p, step])
        active[p] = False
        piv = work[p, step]
        if piv == 0:
            for k in range(step + 1, count):
                chosen[k] = -1
                pivots[k] = 0.0
            return chosen, pivots
        for r in range(m):
            if active[r]:
                f = work[r, step] / piv
                if f != 0:
                    for k in range(step + 1, n):
                        work[r, k] -= f * work[p, k]
    return chosen, pivots


def leja_eliminate_np(vmat, first, count):
    m, n = vmat.shape
    work = vmat.copy()
    chosen = np.full(count, -1, dtype=np.int64)
    pivots = np.zeros(count)
    active = np.ones(m, dtype=bool)
    for step in range(count):
        if step == 0:
            p = first
        else:
            mags = np.where(active, np.abs(work[:, step]), -1.0)
            p = int(np.argmax(mags))
        chosen[step] = p
        pivots[step] = abs(work[p, step])
        active[p] = False
        piv = work[p, step]
        if piv == 0:
            return chosen, pivots
        f = np.where(active, work[:, step] / piv, 0.0)
        work[:, step + 1:] -= np.outer(f, work[p, step + 1:])
    return chosen, pivots


# ---------------------------------------------------------------------------
# Lagrange sums over a mesh: max sum|l|, max sum|l|^2, per-node max |l_i|
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def lagrange_sums_nb(vmesh, coeffs):
    m, n = vmesh.shape
    s1 = np.zeros(m)
    s2 = np.zeros(m)
    absl = np.zeros((m, n))
    for i in prange(m):
        row = np.zeros(n, dtype=np.complex128)
        for k in range(n):
            v = vmesh[i, k]
            for j in range(n):
                row[j] += v * coeffs[k, j]
        for j in range(n):
            a = abs(row[j])
            absl[i, j] = a
            s1[i] += a
            s2[i] += a * a
    node_max = np.zeros(n)
    for j in range(n):
        for i in range(m):
            if absl[i, j] > node_max[j]:
                node_max[j] = absl[i, j]
    return s1, s2, node_max


def lagrange_sums_np(vmesh, coeffs):
    absl = np.abs(vmesh @ coeffs)
    return absl.sum(axis=1), (absl ** 2).sum(axis=1), absl.max(axis=0)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _pick(nb, np_):
    return nb if USE_NUMBA else np_


def monomial_matrix(points, exponents, degree):
    points = np.ascontiguousarray(points, dtype=np.complex128)
    exponents = np.ascontiguousarray(exponents, dtype=np.int64)
    return _pick(monomial_matrix_nb, monomial_matrix_np)(points, exponents, int(degree))


def christoffel_sweep(vmat, coeffs, logscale):
    vmat = np.ascontiguousarray(vmat, dtype=np.complex128)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    logscale = np.ascontiguousarray(logscale, dtype=np.float64)
    upper = bool(np.all(np.tril(coeffs, -1) == 0))
    return _pick(christoffel_sweep_nb, christoffel_sweep_np)(vmat, coeffs, logscale, upper)


def best_subset(vmat, rowlog, rel_tol=1e-12):
    vmat = np.ascontiguousarray(vmat, dtype=np.complex128)
    rowlog = np.ascontiguousarray(rowlog, dtype=np.float64)
    best, idx = _pick(best_subset_nb, best_subset_np)(vmat, rowlog, float(rel_tol))
    return float(best), tuple(int(i) for i in idx)


def leja_eliminate(vmat, first, count):
    vmat = np.ascontiguousarray(vmat, dtype=np.complex128)
    return _pick(leja_eliminate_nb, leja_eliminate_np)(vmat, int(first), int(count))


def lagrange_sums(vmesh, coeffs):
    vmesh = np.ascontiguousarray(vmesh, dtype=np.complex128)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    return _pick(lagrange_sums_nb, lagrange_sums_np)(vmesh, coeffs)
