# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled solver kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    CONVERGED = 0
    MAX_ITER = 1
    DIVERGED = 2
    POLE = 3

cdef extern from "complex.h" nogil:
    double cabs(double complex)


def fixed_point(const double complex[::1] hd, const double complex[::1] minv,
                const double complex[::1] moff, const long[::1] fptr, const long[::1] fidx,
                r0, double damping, long max_iter, double tol, double blowup=1e8):
    cdef Py_ssize_t n = hd.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] r_arr = np.array(r0, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] new_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] r = r_arr
    cdef double complex[::1] nw = new_arr
    cdef double complex den, upd
    cdef double step = INFINITY, d, big
    cdef long it, k
    cdef Py_ssize_t e
    cdef int status = MAX_ITER
    with nogil:
        for it in range(1, max_iter + 1):
            step = 0.0
            big = 0.0
            for e in range(n):
                den = hd[e]
                for k in range(fptr[e], fptr[e + 1]):
                    den = den + moff[fidx[k]] * r[fidx[k]]
                if cabs(den) < 1e-14:
                    status = POLE
                    break
                upd = (1.0 - damping) * r[e] + damping * (-minv[e] / den)
                nw[e] = upd
                d = cabs(upd - r[e])
                if d > step or d != d:
                    step = d
                d = cabs(upd)
                if d > big or d != d:
                    big = d
            if status == POLE:
                break
            for e in range(n):
                r[e] = nw[e]
            if big > blowup or big != big or big == INFINITY:
                status = DIVERGED
                break
            if step <= tol:
                status = CONVERGED
                break
    if status == MAX_ITER:
        it = max_iter
    return r_arr, it, status, step


cdef int _lu_solve(double complex* a, double complex* b, Py_ssize_t n) noexcept nogil:
    """Solve a x = b in place (b <- x) with partial pivoting; 1 if singular."""
    cdef Py_ssize_t i, j, k, p
    cdef double best, v
    cdef double complex t, f
    for k in range(n):
        p = k
        best = cabs(a[k * n + k])
        for i in range(k + 1, n):
            v = cabs(a[i * n + k])
            if v > best:
                best = v
                p = i
        if best == 0.0 or best != best:
            return 1
        if p != k:
            for j in range(n):
                t = a[k * n + j]
                a[k * n + j] = a[p * n + j]
                a[p * n + j] = t
            t = b[k]
            b[k] = b[p]
            b[p] = t
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            if f != 0:
                for j in range(k + 1, n):
                    a[i * n + j] = a[i * n + j] - f * a[k * n + j]
                b[i] = b[i] - f * b[k]
    for i in range(n - 1, -1, -1):
        t = b[i]
        for j in range(i + 1, n):
            t = t - a[i * n + j] * b[j]
        b[i] = t / a[i * n + i]
    return 0


cdef void _system(const double complex[::1] hd, const double complex[::1] minv,
                  const double complex[::1] moff, const long[::1] fptr,
                  const long[::1] fidx, double complex* w, signed char* chart,
                  double complex* F, double complex* J, Py_ssize_t n,
                  double complex* pf, double complex* tf, long* sidx,
                  bint want_jac) noexcept nogil:
    """Residual and (optionally) Jacobian of the charted equations."""
    cdef Py_ssize_t e, a, b, c, ns
    cdef long k, f
    cdef double complex P, T, S, K, base, prod
    if want_jac:
        for a in range(n * n):
            J[a] = 0
    for e in range(n):
        ns = 0
        S = 0
        for k in range(fptr[e], fptr[e + 1]):
            f = fidx[k]
            if chart[f] == 1:
                sidx[ns] = f
                ns += 1
            else:
                S = S + moff[f] * w[f]
        P = 1
        for a in range(ns):
            P = P * w[sidx[a]]
        T = 0
        for a in range(ns):
            prod = 1
            for c in range(ns):
                if c != a:
                    prod = prod * w[sidx[c]]
            pf[a] = prod
            T = T + moff[sidx[a]] * prod
        if want_jac:
            for a in range(ns):
                tf[a] = 0
                for b in range(ns):
                    if b != a:
                        prod = 1
                        for c in range(ns):
                            if c != a and c != b:
                                prod = prod * w[sidx[c]]
                        tf[a] = tf[a] + moff[sidx[b]] * prod
        if chart[e] == 0:
            K = hd[e] * P + S * P + T
            F[e] = minv[e] * P + w[e] * K
            if want_jac:
                J[e * n + e] = J[e * n + e] + K
                for k in range(fptr[e], fptr[e + 1]):
                    f = fidx[k]
                    if chart[f] == 0:
                        J[e * n + f] = J[e * n + f] + w[e] * moff[f] * P
                for a in range(ns):
                    J[e * n + sidx[a]] = J[e * n + sidx[a]] + minv[e] * pf[a] \
                        + w[e] * ((hd[e] + S) * pf[a] + tf[a])
        else:
            base = hd[e] + minv[e] * w[e] + S
            F[e] = base * P + T
            if want_jac:
                J[e * n + e] = J[e * n + e] + minv[e] * P
                for k in range(fptr[e], fptr[e + 1]):
                    f = fidx[k]
                    if chart[f] == 0:
                        J[e * n + f] = J[e * n + f] + moff[f] * P
                for a in range(ns):
                    J[e * n + sidx[a]] = J[e * n + sidx[a]] + base * pf[a] + tf[a]


def newton_charts(const double complex[::1] hd, const double complex[::1] minv,
                  const double complex[::1] moff, const long[::1] fptr, const long[::1] fidx,
                  w0, chart0, long max_iter, double tol, double switch=2.0,
                  double blowup=1e12):
    cdef Py_ssize_t n = hd.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] w_arr = np.array(w0, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] c_arr = np.array(chart0, dtype=np.int8)
    cdef double complex* w = <double complex*> cnp.PyArray_DATA(w_arr)
    cdef signed char* chart = <signed char*> cnp.PyArray_DATA(c_arr)
    cdef Py_ssize_t maxdeg = 1, e, i
    for e in range(n):
        if fptr[e + 1] - fptr[e] > maxdeg:
            maxdeg = fptr[e + 1] - fptr[e]
    cdef double complex* F = <double complex*> malloc(n * sizeof(double complex))
    cdef double complex* J = <double complex*> malloc(n * n * sizeof(double complex))
    cdef double complex* pf = <double complex*> malloc(maxdeg * sizeof(double complex))
    cdef double complex* tf = <double complex*> malloc(maxdeg * sizeof(double complex))
    cdef long* sidx = <long*> malloc(maxdeg * sizeof(long))
    cdef long it = 0
    cdef int status = MAX_ITER
    cdef double step, res = INFINITY, v, big
    try:
        with nogil:
            for it in range(1, max_iter + 1):
                _system(hd, minv, moff, fptr, fidx, w, chart, F, J, n, pf, tf, sidx, True)
                for i in range(n):
                    F[i] = -F[i]
                if _lu_solve(J, F, n):
                    status = POLE
                    break
                step = 0.0
                big = 0.0
                for i in range(n):
                    v = cabs(F[i])
                    if v != v or v == INFINITY:
                        step = v
                        break
                    if v > step:
                        step = v
                if step != step or step == INFINITY:
                    status = POLE
                    break
                for i in range(n):
                    w[i] = w[i] + F[i]
                    if cabs(w[i]) > switch:
                        w[i] = 1.0 / w[i]
                        chart[i] = 1 - chart[i]
                    v = cabs(w[i])
                    if v > big or v != v:
                        big = v
                if big > blowup or big != big:
                    status = DIVERGED
                    break
                if step <= tol:
                    status = CONVERGED
                    break
            if status == MAX_ITER:
                it = max_iter
            if status == CONVERGED or status == MAX_ITER or status == POLE:
                _system(hd, minv, moff, fptr, fidx, w, chart, F, J, n, pf, tf, sidx, False)
                res = 0.0
                for i in range(n):
                    v = cabs(F[i])
                    if v > res or v != v:
                        res = v
    finally:
        free(F)
        free(J)
        free(pf)
        free(tf)
        free(sidx)
    return w_arr, c_arr, it, status, res
