"""Pure-Python dense kernels over ``gmpy2.mpfr`` scalars.

These mirror the compiled kernels in ``_ckernels`` operation for operation,
so both produce bit-identical results at a fixed precision. Every function
takes the working precision in bits explicitly and returns a fresh
``numpy`` object array (or a list for spectra).
"""

from __future__ import annotations

import gmpy2
import numpy as np
from gmpy2 import mpfr

from ..errors import ConvergenceError, NotPositiveDefiniteError, SingularMatrixError

MAX_QL_SWEEPS = 60


def _rows(A, prec: int) -> list[list]:
    return [[mpfr(x, prec) for x in row] for row in np.asarray(A, dtype=object).tolist()]


def _out(rows: list[list]) -> np.ndarray:
    n = len(rows)
    m = len(rows[0]) if n else 0
    out = np.empty((n, m), dtype=object)
    for i in range(n):
        for j in range(m):
            out[i, j] = rows[i][j]
    return out


def matmul(A, B, prec: int) -> np.ndarray:
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        a = _rows(A, prec)
        b = _rows(B, prec)
        n, k = len(a), len(b)
        m = len(b[0]) if k else 0
        if a and len(a[0]) != k:
            raise ValueError(f"shape mismatch: {len(a)}x{len(a[0])} @ {k}x{m}")
        bt = [[b[r][c] for r in range(k)] for c in range(m)]
        zero = mpfr(0)
        out = [[gmpy2.fsum([x * y for x, y in zip(ra, cb)]) if k else zero for cb in bt] for ra in a]
        return _out(out)


def _tred2(V: list[list], n: int):
    d = [V[n - 1][j] for j in range(n)]
    e = [mpfr(0)] * n
    for i in range(n - 1, 0, -1):
        scale = mpfr(0)
        h = mpfr(0)
        for k in range(i):
            scale += abs(d[k])
        if scale == 0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = V[i - 1][j]
                V[i][j] = mpfr(0)
                V[j][i] = mpfr(0)
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = gmpy2.sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h = h - f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = mpfr(0)
            for j in range(i):
                f = d[j]
                V[j][i] = f
                g = e[j] + V[j][j] * f
                for k in range(j + 1, i):
                    g += V[k][j] * d[k]
                    e[k] += V[k][j] * f
                e[j] = g
            f = mpfr(0)
            for j in range(i):
                e[j] /= h
                f += e[j] * d[j]
            hh = f / (h + h)
            for j in range(i):
                e[j] -= hh * d[j]
            for j in range(i):
                f = d[j]
                g = e[j]
                for k in range(j, i):
                    V[k][j] -= f * e[k] + g * d[k]
                d[j] = V[i - 1][j]
                V[i][j] = mpfr(0)
        d[i] = h
    for i in range(n - 1):
        V[n - 1][i] = V[i][i]
        V[i][i] = mpfr(1)
        h = d[i + 1]
        if h != 0:
            for k in range(i + 1):
                d[k] = V[k][i + 1] / h
            for j in range(i + 1):
                g = mpfr(0)
                for k in range(i + 1):
                    g += V[k][i + 1] * V[k][j]
                for k in range(i + 1):
                    V[k][j] -= g * d[k]
        for k in range(i + 1):
            V[k][i + 1] = mpfr(0)
    for j in range(n):
        d[j] = V[n - 1][j]
        V[n - 1][j] = mpfr(0)
    V[n - 1][n - 1] = mpfr(1)
    e[0] = mpfr(0)
    return d, e


def _tql2(V: list[list], d: list, e: list, n: int, prec: int, vectors: bool) -> None:
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = mpfr(0)
    f = mpfr(0)
    tst1 = mpfr(0)
    eps = gmpy2.mul_2exp(mpfr(1), -(prec - 4))
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n - 1:
            if abs(e[m]) <= eps * tst1:
                break
            m += 1
        if m > l:
            sweeps = 0
            while True:
                sweeps += 1
                if sweeps > MAX_QL_SWEEPS:
                    raise ConvergenceError(
                        f"QL iteration did not converge for eigenvalue {l}",
                        residual=float(abs(e[l]) / tst1) if tst1 else float(abs(e[l])),
                    )
                g = d[l]
                p = (d[l + 1] - g) / (2 * e[l])
                r = gmpy2.hypot(p, mpfr(1))
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h
                p = d[m]
                c = mpfr(1)
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = mpfr(0)
                s2 = mpfr(0)
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = gmpy2.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    if vectors:
                        for k in range(n):
                            h = V[k][i + 1]
                            V[k][i + 1] = s * V[k][i] + c * h
                            V[k][i] = c * V[k][i] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if not abs(e[l]) > eps * tst1:
                    break
        d[l] = d[l] + f
        e[l] = mpfr(0)


def sym_eig(A, prec: int, vectors: bool = True):
    """Eigen-decomposition of a symmetric matrix (Householder + implicit QL).

    Returns eigenvalues in ascending order and, if requested, the matching
    orthonormal eigenvectors as columns.
    """
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        V = _rows(A, prec)
        n = len(V)
        if n == 0:
            return [], (np.empty((0, 0), dtype=object) if vectors else None)
        d, e = _tred2(V, n)
        _tql2(V, d, e, n, prec, vectors)
        order = sorted(range(n), key=lambda i: d[i])
        w = [d[i] for i in order]
        if not vectors:
            return w, None
        return w, _out([[V[r][i] for i in order] for r in range(n)])


def inverse(A, prec: int) -> np.ndarray:
    """Gauss-Jordan inverse with partial pivoting."""
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        a = _rows(A, prec)
        n = len(a)
        inv = [[mpfr(1 if i == j else 0) for j in range(n)] for i in range(n)]
        for col in range(n):
            piv = max(range(col, n), key=lambda r: abs(a[r][col]))
            if a[piv][col] == 0:
                raise SingularMatrixError(f"zero pivot in column {col}")
            if piv != col:
                a[col], a[piv] = a[piv], a[col]
                inv[col], inv[piv] = inv[piv], inv[col]
            p = a[col][col]
            ra = a[col]
            ri = inv[col]
            for j in range(n):
                ra[j] /= p
                ri[j] /= p
            for r in range(n):
                if r == col:
                    continue
                f = a[r][col]
                if f == 0:
                    continue
                rr = a[r]
                rv = inv[r]
                for j in range(n):
                    rr[j] -= f * ra[j]
                    rv[j] -= f * ri[j]
        return _out(inv)


def cholesky(A, prec: int) -> np.ndarray:
    """Lower-triangular ``L`` with ``A = L Lᵀ``."""
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        a = _rows(A, prec)
        n = len(a)
        L = [[mpfr(0)] * n for _ in range(n)]
        for j in range(n):
            s = a[j][j]
            for k in range(j):
                s -= L[j][k] * L[j][k]
            if not s > 0:
                raise NotPositiveDefiniteError(f"non-positive pivot {float(s):.3e} at index {j}")
            L[j][j] = gmpy2.sqrt(s)
            for i in range(j + 1, n):
                s = a[i][j]
                for k in range(j):
                    s -= L[i][k] * L[j][k]
                L[i][j] = s / L[j][j]
        return _out(L)
