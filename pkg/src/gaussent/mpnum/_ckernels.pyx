# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense kernels over MPFR.

Operation-for-operation ports of ``_pykernels``: identical rounding
sequences, so results agree bit for bit with the pure-Python fallback.
Inputs are copied into contiguous ``mpfr_t`` buffers, the loops run in C,
and results are copied back into fresh ``gmpy2.mpfr`` objects.
"""

from libc.stdlib cimport malloc, free

from gmpy2 cimport (
    import_gmpy2, mpfr as MpfrObject, GMPy_MPFR_New, MPFR_Check, MPFR,
    __mpfr_struct, mpfr_ptr, mpfr_srcptr, mpfr_prec_t, mpfr_rnd_t, MPFR_RNDN,
)

import gmpy2
import numpy as np

from ..errors import ConvergenceError, NotPositiveDefiniteError, SingularMatrixError

import_gmpy2()

cdef extern from "mpfr.h":
    void mpfr_init2(mpfr_ptr x, mpfr_prec_t prec)
    void mpfr_clear(mpfr_ptr x)
    int mpfr_set(mpfr_ptr rop, mpfr_srcptr op, mpfr_rnd_t rnd)
    int mpfr_set_ui(mpfr_ptr rop, unsigned long op, mpfr_rnd_t rnd)
    int mpfr_set_si(mpfr_ptr rop, long op, mpfr_rnd_t rnd)
    int mpfr_add(mpfr_ptr rop, mpfr_srcptr a, mpfr_srcptr b, mpfr_rnd_t rnd)
    int mpfr_sub(mpfr_ptr rop, mpfr_srcptr a, mpfr_srcptr b, mpfr_rnd_t rnd)
    int mpfr_mul(mpfr_ptr rop, mpfr_srcptr a, mpfr_srcptr b, mpfr_rnd_t rnd)
    int mpfr_div(mpfr_ptr rop, mpfr_srcptr a, mpfr_srcptr b, mpfr_rnd_t rnd)
    int mpfr_sqrt(mpfr_ptr rop, mpfr_srcptr a, mpfr_rnd_t rnd)
    int mpfr_hypot(mpfr_ptr rop, mpfr_srcptr a, mpfr_srcptr b, mpfr_rnd_t rnd)
    int mpfr_abs(mpfr_ptr rop, mpfr_srcptr a, mpfr_rnd_t rnd)
    int mpfr_neg(mpfr_ptr rop, mpfr_srcptr a, mpfr_rnd_t rnd)
    int mpfr_mul_2si(mpfr_ptr rop, mpfr_srcptr a, long e, mpfr_rnd_t rnd)
    int mpfr_sum(mpfr_ptr rop, const mpfr_ptr *tab, unsigned long n, mpfr_rnd_t rnd)
    int mpfr_cmp(mpfr_srcptr a, mpfr_srcptr b)
    int mpfr_sgn(mpfr_srcptr a)
    int mpfr_zero_p(mpfr_srcptr a)
    void mpfr_swap(mpfr_ptr a, mpfr_ptr b)
    double mpfr_get_d(mpfr_srcptr a, mpfr_rnd_t rnd)


MAX_QL_SWEEPS = 60


cdef class _Buf:
    """Owned block of ``count`` initialised mpfr variables."""

    cdef __mpfr_struct* p
    cdef Py_ssize_t count

    def __cinit__(self, Py_ssize_t count, mpfr_prec_t prec):
        cdef Py_ssize_t i
        self.count = 0
        self.p = <__mpfr_struct*>malloc(max(count, 1) * sizeof(__mpfr_struct))
        if self.p == NULL:
            raise MemoryError()
        for i in range(count):
            mpfr_init2(&self.p[i], prec)
        self.count = count

    def __dealloc__(self):
        cdef Py_ssize_t i
        if self.p != NULL:
            for i in range(self.count):
                mpfr_clear(&self.p[i])
            free(self.p)


cdef _Buf _load(object A, Py_ssize_t n, Py_ssize_t m, mpfr_prec_t prec):
    cdef _Buf buf = _Buf(n * m, prec)
    cdef Py_ssize_t i, j
    cdef object x
    rows = np.asarray(A, dtype=object).tolist()
    for i in range(n):
        row = rows[i]
        for j in range(m):
            x = row[j]
            if not MPFR_Check(x):
                x = gmpy2.mpfr(x, prec)
            mpfr_set(&buf.p[i * m + j], MPFR(<MpfrObject>x), MPFR_RNDN)
    return buf


cdef object _new(mpfr_srcptr src, mpfr_prec_t prec):
    cdef MpfrObject out = GMPy_MPFR_New(prec, NULL)
    mpfr_set(MPFR(out), src, MPFR_RNDN)
    return out


cdef object _store(__mpfr_struct* p, Py_ssize_t n, Py_ssize_t m, mpfr_prec_t prec):
    cdef Py_ssize_t i, j
    out = np.empty((n, m), dtype=object)
    for i in range(n):
        for j in range(m):
            out[i, j] = _new(&p[i * m + j], prec)
    return out


def matmul(A, B, int prec):
    a_shape = np.shape(A)
    b_shape = np.shape(B)
    cdef Py_ssize_t n = a_shape[0], k = a_shape[1], m = b_shape[1]
    if b_shape[0] != k:
        raise ValueError(f"shape mismatch: {n}x{k} @ {b_shape[0]}x{m}")
    cdef _Buf a = _load(A, n, k, prec)
    cdef _Buf b = _load(B, k, m, prec)
    cdef _Buf c = _Buf(n * m, prec)
    cdef _Buf t = _Buf(k, prec)
    cdef mpfr_ptr* ptrs = <mpfr_ptr*>malloc(max(k, 1) * sizeof(mpfr_ptr))
    cdef Py_ssize_t i, j, r
    try:
        for r in range(k):
            ptrs[r] = &t.p[r]
        for i in range(n):
            for j in range(m):
                for r in range(k):
                    mpfr_mul(&t.p[r], &a.p[i * k + r], &b.p[r * m + j], MPFR_RNDN)
                mpfr_sum(&c.p[i * m + j], ptrs, k, MPFR_RNDN)
    finally:
        free(ptrs)
    return _store(c.p, n, m, prec)


cdef void _tred2(__mpfr_struct* V, __mpfr_struct* d, __mpfr_struct* e, Py_ssize_t n,
                 __mpfr_struct* w) noexcept:
    # w: scratch of 7 variables (scale, h, f, g, hh, t, u)
    cdef __mpfr_struct* scale = &w[0]
    cdef __mpfr_struct* h = &w[1]
    cdef __mpfr_struct* f = &w[2]
    cdef __mpfr_struct* g = &w[3]
    cdef __mpfr_struct* hh = &w[4]
    cdef __mpfr_struct* t = &w[5]
    cdef __mpfr_struct* u = &w[6]
    cdef Py_ssize_t i, j, k
    for j in range(n):
        mpfr_set(&d[j], &V[(n - 1) * n + j], MPFR_RNDN)
        mpfr_set_ui(&e[j], 0, MPFR_RNDN)
    for i in range(n - 1, 0, -1):
        mpfr_set_ui(scale, 0, MPFR_RNDN)
        mpfr_set_ui(h, 0, MPFR_RNDN)
        for k in range(i):
            mpfr_abs(t, &d[k], MPFR_RNDN)
            mpfr_add(scale, scale, t, MPFR_RNDN)
        if mpfr_zero_p(scale):
            mpfr_set(&e[i], &d[i - 1], MPFR_RNDN)
            for j in range(i):
                mpfr_set(&d[j], &V[(i - 1) * n + j], MPFR_RNDN)
                mpfr_set_ui(&V[i * n + j], 0, MPFR_RNDN)
                mpfr_set_ui(&V[j * n + i], 0, MPFR_RNDN)
        else:
            for k in range(i):
                mpfr_div(&d[k], &d[k], scale, MPFR_RNDN)
                mpfr_mul(t, &d[k], &d[k], MPFR_RNDN)
                mpfr_add(h, h, t, MPFR_RNDN)
            mpfr_set(f, &d[i - 1], MPFR_RNDN)
            mpfr_sqrt(g, h, MPFR_RNDN)
            if mpfr_sgn(f) > 0:
                mpfr_neg(g, g, MPFR_RNDN)
            mpfr_mul(&e[i], scale, g, MPFR_RNDN)
            mpfr_mul(t, f, g, MPFR_RNDN)
            mpfr_sub(h, h, t, MPFR_RNDN)
            mpfr_sub(&d[i - 1], f, g, MPFR_RNDN)
            for j in range(i):
                mpfr_set_ui(&e[j], 0, MPFR_RNDN)
            for j in range(i):
                mpfr_set(f, &d[j], MPFR_RNDN)
                mpfr_set(&V[j * n + i], f, MPFR_RNDN)
                mpfr_mul(t, &V[j * n + j], f, MPFR_RNDN)
                mpfr_add(g, &e[j], t, MPFR_RNDN)
                for k in range(j + 1, i):
                    mpfr_mul(t, &V[k * n + j], &d[k], MPFR_RNDN)
                    mpfr_add(g, g, t, MPFR_RNDN)
                    mpfr_mul(t, &V[k * n + j], f, MPFR_RNDN)
                    mpfr_add(&e[k], &e[k], t, MPFR_RNDN)
                mpfr_set(&e[j], g, MPFR_RNDN)
            mpfr_set_ui(f, 0, MPFR_RNDN)
            for j in range(i):
                mpfr_div(&e[j], &e[j], h, MPFR_RNDN)
                mpfr_mul(t, &e[j], &d[j], MPFR_RNDN)
                mpfr_add(f, f, t, MPFR_RNDN)
            mpfr_add(t, h, h, MPFR_RNDN)
            mpfr_div(hh, f, t, MPFR_RNDN)
            for j in range(i):
                mpfr_mul(t, hh, &d[j], MPFR_RNDN)
                mpfr_sub(&e[j], &e[j], t, MPFR_RNDN)
            for j in range(i):
                mpfr_set(f, &d[j], MPFR_RNDN)
                mpfr_set(g, &e[j], MPFR_RNDN)
                for k in range(j, i):
                    mpfr_mul(t, f, &e[k], MPFR_RNDN)
                    mpfr_mul(u, g, &d[k], MPFR_RNDN)
                    mpfr_add(t, t, u, MPFR_RNDN)
                    mpfr_sub(&V[k * n + j], &V[k * n + j], t, MPFR_RNDN)
                mpfr_set(&d[j], &V[(i - 1) * n + j], MPFR_RNDN)
                mpfr_set_ui(&V[i * n + j], 0, MPFR_RNDN)
        mpfr_set(&d[i], h, MPFR_RNDN)
    for i in range(n - 1):
        mpfr_set(&V[(n - 1) * n + i], &V[i * n + i], MPFR_RNDN)
        mpfr_set_ui(&V[i * n + i], 1, MPFR_RNDN)
        mpfr_set(h, &d[i + 1], MPFR_RNDN)
        if not mpfr_zero_p(h):
            for k in range(i + 1):
                mpfr_div(&d[k], &V[k * n + i + 1], h, MPFR_RNDN)
            for j in range(i + 1):
                mpfr_set_ui(g, 0, MPFR_RNDN)
                for k in range(i + 1):
                    mpfr_mul(t, &V[k * n + i + 1], &V[k * n + j], MPFR_RNDN)
                    mpfr_add(g, g, t, MPFR_RNDN)
                for k in range(i + 1):
                    mpfr_mul(t, g, &d[k], MPFR_RNDN)
                    mpfr_sub(&V[k * n + j], &V[k * n + j], t, MPFR_RNDN)
        for k in range(i + 1):
            mpfr_set_ui(&V[k * n + i + 1], 0, MPFR_RNDN)
    for j in range(n):
        mpfr_set(&d[j], &V[(n - 1) * n + j], MPFR_RNDN)
        mpfr_set_ui(&V[(n - 1) * n + j], 0, MPFR_RNDN)
    mpfr_set_ui(&V[(n - 1) * n + n - 1], 1, MPFR_RNDN)
    mpfr_set_ui(&e[0], 0, MPFR_RNDN)


cdef int _tql2(__mpfr_struct* V, __mpfr_struct* d, __mpfr_struct* e, Py_ssize_t n,
               mpfr_prec_t prec, bint vectors, __mpfr_struct* w, double* resid) noexcept:
    # returns -1 (converged) or the index of the eigenvalue that failed
    cdef __mpfr_struct* f = &w[0]
    cdef __mpfr_struct* tst1 = &w[1]
    cdef __mpfr_struct* eps = &w[2]
    cdef __mpfr_struct* g = &w[3]
    cdef __mpfr_struct* p = &w[4]
    cdef __mpfr_struct* r = &w[5]
    cdef __mpfr_struct* h = &w[6]
    cdef __mpfr_struct* dl1 = &w[7]
    cdef __mpfr_struct* c = &w[8]
    cdef __mpfr_struct* c2 = &w[9]
    cdef __mpfr_struct* c3 = &w[10]
    cdef __mpfr_struct* el1 = &w[11]
    cdef __mpfr_struct* s = &w[12]
    cdef __mpfr_struct* s2 = &w[13]
    cdef __mpfr_struct* t = &w[14]
    cdef __mpfr_struct* u = &w[15]
    cdef __mpfr_struct* one = &w[16]
    cdef __mpfr_struct* hv = &w[17]
    cdef Py_ssize_t i, l, m, k
    cdef int sweeps
    for i in range(1, n):
        mpfr_set(&e[i - 1], &e[i], MPFR_RNDN)
    mpfr_set_ui(&e[n - 1], 0, MPFR_RNDN)
    mpfr_set_ui(f, 0, MPFR_RNDN)
    mpfr_set_ui(tst1, 0, MPFR_RNDN)
    mpfr_set_ui(one, 1, MPFR_RNDN)
    mpfr_set_ui(eps, 1, MPFR_RNDN)
    mpfr_mul_2si(eps, eps, -(prec - 4), MPFR_RNDN)
    for l in range(n):
        mpfr_abs(t, &d[l], MPFR_RNDN)
        mpfr_abs(u, &e[l], MPFR_RNDN)
        mpfr_add(t, t, u, MPFR_RNDN)
        if mpfr_cmp(t, tst1) > 0:
            mpfr_set(tst1, t, MPFR_RNDN)
        m = l
        while m < n - 1:
            mpfr_abs(t, &e[m], MPFR_RNDN)
            mpfr_mul(u, eps, tst1, MPFR_RNDN)
            if mpfr_cmp(t, u) <= 0:
                break
            m += 1
        if m > l:
            sweeps = 0
            while True:
                sweeps += 1
                if sweeps > MAX_QL_SWEEPS:
                    mpfr_abs(t, &e[l], MPFR_RNDN)
                    if mpfr_zero_p(tst1):
                        resid[0] = mpfr_get_d(t, MPFR_RNDN)
                    else:
                        mpfr_div(t, t, tst1, MPFR_RNDN)
                        resid[0] = mpfr_get_d(t, MPFR_RNDN)
                    return <int>l
                mpfr_set(g, &d[l], MPFR_RNDN)
                mpfr_sub(t, &d[l + 1], g, MPFR_RNDN)
                mpfr_add(u, &e[l], &e[l], MPFR_RNDN)
                mpfr_div(p, t, u, MPFR_RNDN)
                mpfr_hypot(r, p, one, MPFR_RNDN)
                if mpfr_sgn(p) < 0:
                    mpfr_neg(r, r, MPFR_RNDN)
                mpfr_add(t, p, r, MPFR_RNDN)
                mpfr_div(&d[l], &e[l], t, MPFR_RNDN)
                mpfr_mul(&d[l + 1], &e[l], t, MPFR_RNDN)
                mpfr_set(dl1, &d[l + 1], MPFR_RNDN)
                mpfr_sub(h, g, &d[l], MPFR_RNDN)
                for i in range(l + 2, n):
                    mpfr_sub(&d[i], &d[i], h, MPFR_RNDN)
                mpfr_add(f, f, h, MPFR_RNDN)
                mpfr_set(p, &d[m], MPFR_RNDN)
                mpfr_set_ui(c, 1, MPFR_RNDN)
                mpfr_set(c2, c, MPFR_RNDN)
                mpfr_set(c3, c, MPFR_RNDN)
                mpfr_set(el1, &e[l + 1], MPFR_RNDN)
                mpfr_set_ui(s, 0, MPFR_RNDN)
                mpfr_set_ui(s2, 0, MPFR_RNDN)
                for i in range(m - 1, l - 1, -1):
                    mpfr_set(c3, c2, MPFR_RNDN)
                    mpfr_set(c2, c, MPFR_RNDN)
                    mpfr_set(s2, s, MPFR_RNDN)
                    mpfr_mul(g, c, &e[i], MPFR_RNDN)
                    mpfr_mul(h, c, p, MPFR_RNDN)
                    mpfr_hypot(r, p, &e[i], MPFR_RNDN)
                    mpfr_mul(&e[i + 1], s, r, MPFR_RNDN)
                    mpfr_div(s, &e[i], r, MPFR_RNDN)
                    mpfr_div(c, p, r, MPFR_RNDN)
                    mpfr_mul(t, c, &d[i], MPFR_RNDN)
                    mpfr_mul(u, s, g, MPFR_RNDN)
                    mpfr_sub(p, t, u, MPFR_RNDN)
                    mpfr_mul(t, c, g, MPFR_RNDN)
                    mpfr_mul(u, s, &d[i], MPFR_RNDN)
                    mpfr_add(t, t, u, MPFR_RNDN)
                    mpfr_mul(t, s, t, MPFR_RNDN)
                    mpfr_add(&d[i + 1], h, t, MPFR_RNDN)
                    if vectors:
                        for k in range(n):
                            mpfr_set(hv, &V[k * n + i + 1], MPFR_RNDN)
                            mpfr_mul(t, s, &V[k * n + i], MPFR_RNDN)
                            mpfr_mul(u, c, hv, MPFR_RNDN)
                            mpfr_add(&V[k * n + i + 1], t, u, MPFR_RNDN)
                            mpfr_mul(t, c, &V[k * n + i], MPFR_RNDN)
                            mpfr_mul(u, s, hv, MPFR_RNDN)
                            mpfr_sub(&V[k * n + i], t, u, MPFR_RNDN)
                mpfr_neg(t, s, MPFR_RNDN)
                mpfr_mul(t, t, s2, MPFR_RNDN)
                mpfr_mul(t, t, c3, MPFR_RNDN)
                mpfr_mul(t, t, el1, MPFR_RNDN)
                mpfr_mul(t, t, &e[l], MPFR_RNDN)
                mpfr_div(p, t, dl1, MPFR_RNDN)
                mpfr_mul(&e[l], s, p, MPFR_RNDN)
                mpfr_mul(&d[l], c, p, MPFR_RNDN)
                mpfr_abs(t, &e[l], MPFR_RNDN)
                mpfr_mul(u, eps, tst1, MPFR_RNDN)
                if not mpfr_cmp(t, u) > 0:
                    break
        mpfr_add(&d[l], &d[l], f, MPFR_RNDN)
        mpfr_set_ui(&e[l], 0, MPFR_RNDN)
    return -1


def sym_eig(A, int prec, bint vectors=True):
    """Symmetric eigen-decomposition; ascending eigenvalues, column vectors."""
    cdef Py_ssize_t n = np.shape(A)[0]
    cdef Py_ssize_t i
    cdef double resid = 0.0
    cdef int failed
    if n == 0:
        return [], (np.empty((0, 0), dtype=object) if vectors else None)
    cdef _Buf V = _load(A, n, n, prec)
    cdef _Buf d = _Buf(n, prec)
    cdef _Buf e = _Buf(n, prec)
    cdef _Buf w = _Buf(18, prec)
    _tred2(V.p, d.p, e.p, n, w.p)
    failed = _tql2(V.p, d.p, e.p, n, prec, vectors, w.p, &resid)
    if failed >= 0:
        raise ConvergenceError(f"QL iteration did not converge for eigenvalue {failed}", residual=resid)
    vals = [_new(&d.p[i], prec) for i in range(n)]
    order = sorted(range(n), key=lambda i: vals[i])
    w_sorted = [vals[i] for i in order]
    if not vectors:
        return w_sorted, None
    full = _store(V.p, n, n, prec)
    return w_sorted, full[:, order]


def inverse(A, int prec):
    """Gauss-Jordan inverse with partial pivoting."""
    cdef Py_ssize_t n = np.shape(A)[0]
    cdef _Buf a = _load(A, n, n, prec)
    cdef _Buf inv = _Buf(n * n, prec)
    cdef _Buf w = _Buf(4, prec)
    cdef __mpfr_struct* piv = &w.p[0]
    cdef __mpfr_struct* fac = &w.p[1]
    cdef __mpfr_struct* t = &w.p[2]
    cdef __mpfr_struct* best = &w.p[3]
    cdef Py_ssize_t i, j, r, col, prow
    for i in range(n):
        for j in range(n):
            mpfr_set_ui(&inv.p[i * n + j], 1 if i == j else 0, MPFR_RNDN)
    for col in range(n):
        prow = col
        mpfr_abs(best, &a.p[col * n + col], MPFR_RNDN)
        for r in range(col + 1, n):
            mpfr_abs(t, &a.p[r * n + col], MPFR_RNDN)
            if mpfr_cmp(t, best) > 0:
                mpfr_set(best, t, MPFR_RNDN)
                prow = r
        if mpfr_zero_p(&a.p[prow * n + col]):
            raise SingularMatrixError(f"zero pivot in column {col}")
        if prow != col:
            for j in range(n):
                mpfr_swap(&a.p[col * n + j], &a.p[prow * n + j])
                mpfr_swap(&inv.p[col * n + j], &inv.p[prow * n + j])
        mpfr_set(piv, &a.p[col * n + col], MPFR_RNDN)
        for j in range(n):
            mpfr_div(&a.p[col * n + j], &a.p[col * n + j], piv, MPFR_RNDN)
            mpfr_div(&inv.p[col * n + j], &inv.p[col * n + j], piv, MPFR_RNDN)
        for r in range(n):
            if r == col:
                continue
            if mpfr_zero_p(&a.p[r * n + col]):
                continue
            mpfr_set(fac, &a.p[r * n + col], MPFR_RNDN)
            for j in range(n):
                mpfr_mul(t, fac, &a.p[col * n + j], MPFR_RNDN)
                mpfr_sub(&a.p[r * n + j], &a.p[r * n + j], t, MPFR_RNDN)
                mpfr_mul(t, fac, &inv.p[col * n + j], MPFR_RNDN)
                mpfr_sub(&inv.p[r * n + j], &inv.p[r * n + j], t, MPFR_RNDN)
    return _store(inv.p, n, n, prec)


def cholesky(A, int prec):
    """Lower-triangular ``L`` with ``A = L Lᵀ``."""
    cdef Py_ssize_t n = np.shape(A)[0]
    cdef _Buf a = _load(A, n, n, prec)
    cdef _Buf L = _Buf(n * n, prec)
    cdef _Buf w = _Buf(2, prec)
    cdef __mpfr_struct* s = &w.p[0]
    cdef __mpfr_struct* t = &w.p[1]
    cdef Py_ssize_t i, j, k
    for i in range(n * n):
        mpfr_set_ui(&L.p[i], 0, MPFR_RNDN)
    for j in range(n):
        mpfr_set(s, &a.p[j * n + j], MPFR_RNDN)
        for k in range(j):
            mpfr_mul(t, &L.p[j * n + k], &L.p[j * n + k], MPFR_RNDN)
            mpfr_sub(s, s, t, MPFR_RNDN)
        if not mpfr_sgn(s) > 0:
            raise NotPositiveDefiniteError(
                f"non-positive pivot {mpfr_get_d(s, MPFR_RNDN):.3e} at index {j}")
        mpfr_sqrt(&L.p[j * n + j], s, MPFR_RNDN)
        for i in range(j + 1, n):
            mpfr_set(s, &a.p[i * n + j], MPFR_RNDN)
            for k in range(j):
                mpfr_mul(t, &L.p[i * n + k], &L.p[j * n + k], MPFR_RNDN)
                mpfr_sub(s, s, t, MPFR_RNDN)
            mpfr_div(&L.p[i * n + j], s, &L.p[j * n + j], MPFR_RNDN)
    return _store(L.p, n, n, prec)
