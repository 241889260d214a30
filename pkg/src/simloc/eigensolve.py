"""Dense real-symmetric eigensolver.

Householder reduction to tridiagonal form with the orthogonal transform
accumulated, followed by implicit QL iterations with a Wilkinson-type shift.
Both stages are compiled with numba; the kernel is single-threaded and
releases the GIL so realizations can be diagonalized concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConvergenceError, InvalidInputError

__all__ = ["EigenDecomposition", "eigh_symmetric", "tridiagonalize", "MAX_SWEEPS"]

MAX_SWEEPS = 50


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@numba.njit(cache=True, nogil=True, fastmath={"reassoc", "contract"})
def _householder(a, d, e, q):
    # Reduces symmetric a (overwritten) to tridiagonal form: on exit d holds
    # the diagonal, e[i] the coupling of rows i-1 and i, and q the orthogonal
    # Q with a = Q T Q^T.  Row k of the trailing block doubles as column k,
    # so every inner loop runs over contiguous memory.
    n = a.shape[0]
    vs = np.zeros((n, n))
    betas = np.zeros(n)
    p = np.zeros(n)
    for k in range(n - 2):
        m0 = k + 1
        alpha = 0.0
        for j in range(m0, n):
            alpha += a[k, j] * a[k, j]
        alpha = np.sqrt(alpha)
        if alpha == 0.0:
            e[m0] = 0.0
            continue
        if a[k, m0] > 0.0:
            alpha = -alpha
        v = vs[k]
        vnorm2 = 0.0
        for j in range(m0, n):
            v[j] = a[k, j]
        v[m0] -= alpha
        for j in range(m0, n):
            vnorm2 += v[j] * v[j]
        e[m0] = alpha
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        betas[k] = beta
        kk = 0.0
        for i in range(m0, n):
            acc = 0.0
            for j in range(m0, n):
                acc += a[i, j] * v[j]
            p[i] = beta * acc
            kk += p[i] * v[i]
        kk *= 0.5 * beta
        for i in range(m0, n):
            p[i] -= kk * v[i]
        for i in range(m0, n):
            vi = v[i]
            pi = p[i]
            for j in range(m0, n):
                a[i, j] -= vi * p[j] + pi * v[j]
        for j in range(m0, n):
            a[k, j] = 0.0
            a[j, k] = 0.0
        a[k, m0] = alpha
        a[m0, k] = alpha
    for i in range(n):
        d[i] = a[i, i]
    e[0] = 0.0
    if n >= 2:
        e[n - 1] = a[n - 1, n - 2]
    for i in range(n):
        for j in range(n):
            q[i, j] = 0.0
        q[i, i] = 1.0
    r = np.zeros(n)
    for k in range(n - 3, -1, -1):
        beta = betas[k]
        if beta == 0.0:
            continue
        m0 = k + 1
        v = vs[k]
        for j in range(m0, n):
            r[j] = 0.0
        for i in range(m0, n):
            vi = v[i]
            if vi != 0.0:
                for j in range(m0, n):
                    r[j] += vi * q[i, j]
        for i in range(m0, n):
            c = beta * v[i]
            if c != 0.0:
                for j in range(m0, n):
                    q[i, j] -= c * r[j]


@numba.njit(cache=True, nogil=True)
def _hypot(a, b):
    return np.hypot(a, b)


@numba.njit(cache=True, nogil=True, fastmath={"contract"})
def _tql(d, e, zt, max_sweeps):
    # zt holds eigenvectors as rows so the rotations touch contiguous memory.
    # Returns -1 on success, otherwise the index of the eigenvalue that failed.
    n = d.shape[0]
    eps = np.finfo(np.float64).eps
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    # Relative test eps*(|d_m| + |d_m+1|), plus an absolute floor eps*||T||
    # so exactly degenerate clusters at zero still deflate.
    tnorm = 0.0
    for i in range(n):
        tnorm = max(tnorm, abs(d[i]) + abs(e[i]) + (abs(e[i - 1]) if i > 0 else 0.0))
    floor = eps * tnorm
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            if it == max_sweeps:
                return l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = _hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = _hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = zt[i + 1, k]
                    zt[i + 1, k] = s * zt[i, k] + c * f
                    zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def tridiagonalize(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(diag, offdiag, q)`` with ``q.T @ a @ q`` tridiagonal.

    ``offdiag[i]`` couples rows ``i - 1`` and ``i`` (``offdiag[0] == 0``).
    """
    work = np.array(a, dtype=np.float64, order="C", copy=True)
    n = work.shape[0]
    d = np.zeros(n)
    e = np.zeros(n)
    q = np.empty((n, n))
    _householder(work, d, e, q)
    return d, e, q


def eigh_symmetric(h) -> EigenDecomposition:
    """All eigenpairs of a real symmetric matrix, eigenvalues ascending.

    ``h`` may be a :class:`~simloc.model.Hamiltonian` or any square array.
    Column ``k`` of ``eigenvectors`` belongs to ``eigenvalues[k]``.
    """
    a = np.asarray(getattr(h, "entries", h), dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-14 * max(scale, 1e-300)):
        raise InvalidInputError("matrix is not symmetric")
    d, e, z = tridiagonalize(a)
    zt = np.ascontiguousarray(z.T)
    failed = _tql(d, e, zt, MAX_SWEEPS)
    if failed >= 0:
        raise ConvergenceError(
            f"QL iteration did not converge within {MAX_SWEEPS} sweeps for eigenvalue {failed}",
            index=int(failed),
        )
    order = np.argsort(d, kind="stable")
    vals = d[order]
    vecs = np.ascontiguousarray(zt[order].T)
    vals.flags.writeable = False
    vecs.flags.writeable = False
    return EigenDecomposition(vals, vecs)
