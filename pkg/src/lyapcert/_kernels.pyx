# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Schur complement assembly and fixed-step integrators.

Every function here has a numpy twin in ``_fallback.py`` with the same
signature; ``kernels.py`` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite

cnp.import_array()


def schur_accumulate(cnp.int64_t[::1] rows, cnp.int64_t[::1] p, cnp.int64_t[::1] q,
                     double[::1] a, double[:, ::1] W, double[:, ::1] M):
    cdef Py_ssize_t E = rows.shape[0]
    cdef Py_ssize_t e, f
    cdef cnp.int64_t re, pe, qe, pf, qf
    cdef double ae, val
    with nogil:
        for e in range(E):
            re = rows[e]
            pe = p[e]
            qe = q[e]
            ae = a[e]
            M[re, re] += ae * ae * (W[pe, pe] * W[qe, qe] + W[pe, qe] * W[qe, pe])
            for f in range(e + 1, E):
                pf = p[f]
                qf = q[f]
                val = ae * a[f] * (W[pe, pf] * W[qe, qf] + W[pe, qf] * W[qe, pf])
                M[re, rows[f]] += val
                M[rows[f], re] += val


cdef inline void _eval_system(const cnp.int64_t[:, ::1] exps, const double[::1] coefs,
                              const cnp.int64_t[::1] offsets, const double* x,
                              Py_ssize_t nvars, double* out) noexcept nogil:
    cdef Py_ssize_t i, t, v, k, ncomp = offsets.shape[0] - 1
    cdef double acc, term
    for i in range(ncomp):
        acc = 0.0
        for t in range(offsets[i], offsets[i + 1]):
            term = coefs[t]
            for v in range(nvars):
                for k in range(exps[t, v]):
                    term *= x[v]
            acc += term
        out[i] = acc


cdef inline void _fr_step(const cnp.int64_t[:, ::1] exps, const double[::1] coefs,
                          const cnp.int64_t[::1] offsets, Py_ssize_t nq, double* x, double dt,
                          const double[::1] c_coef, const double[::1] d_coef, double* force) noexcept nogil:
    cdef Py_ssize_t s, i
    for s in range(4):
        for i in range(nq):
            x[i] += c_coef[s] * dt * x[nq + i]
        if d_coef[s] != 0.0:
            _eval_system(exps, coefs, offsets, x, nq, force)
            for i in range(nq):
                x[nq + i] += d_coef[s] * dt * force[i]


def fr_integrate(const cnp.int64_t[:, ::1] exps, const double[::1] coefs, const cnp.int64_t[::1] offsets,
                 Py_ssize_t nq, x0, double dt, Py_ssize_t nsteps, const double[::1] c_coef,
                 const double[::1] d_coef, double[:, ::1] out, Py_ssize_t stride):
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] force = np.zeros(max(nq, 1))
    cdef Py_ssize_t n = x.shape[0], k, i, row = 0
    for i in range(n):
        out[0, i] = x[i]
    with nogil:
        for k in range(1, nsteps + 1):
            _fr_step(exps, coefs, offsets, nq, &x[0], dt, c_coef, d_coef, &force[0])
            if stride > 0 and k % stride == 0:
                row += 1
                for i in range(n):
                    out[row, i] = x[i]
    return np.asarray(x)


def fr_integrate_mid(const cnp.int64_t[:, ::1] exps, const double[::1] coefs, const cnp.int64_t[::1] offsets,
                     Py_ssize_t nq, x0, double dt, Py_ssize_t nsteps, const double[::1] c_coef,
                     const double[::1] d_coef, double[:, ::1] out):
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] h = np.zeros_like(x)
    cdef double[::1] force = np.zeros(max(nq, 1))
    cdef Py_ssize_t n = x.shape[0], k, i
    for i in range(n):
        out[0, i] = x[i]
    with nogil:
        for k in range(nsteps):
            for i in range(n):
                h[i] = x[i]
            _fr_step(exps, coefs, offsets, nq, &h[0], 0.5 * dt, c_coef, d_coef, &force[0])
            _fr_step(exps, coefs, offsets, nq, &x[0], dt, c_coef, d_coef, &force[0])
            for i in range(n):
                out[2 * k + 1, i] = h[i]
                out[2 * k + 2, i] = x[i]
    return np.asarray(x)


def eval_system(const cnp.int64_t[:, ::1] exps, const double[::1] coefs, const cnp.int64_t[::1] offsets, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] out = np.zeros(offsets.shape[0] - 1)
    _eval_system(exps, coefs, offsets, &xv[0], xv.shape[0], &out[0])
    return np.asarray(out)


def rk4_integrate(const cnp.int64_t[:, ::1] exps, const double[::1] coefs, const cnp.int64_t[::1] offsets,
                  x0, double dt, Py_ssize_t nsteps, double[:, ::1] out, Py_ssize_t stride):
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], k, i, row = 0
    cdef double[::1] k1 = np.zeros(n)
    cdef double[::1] k2 = np.zeros(n)
    cdef double[::1] k3 = np.zeros(n)
    cdef double[::1] k4 = np.zeros(n)
    cdef double[::1] tmp = np.zeros(n)
    cdef bint bad = False
    for i in range(n):
        out[0, i] = x[i]
    with nogil:
        for k in range(1, nsteps + 1):
            _eval_system(exps, coefs, offsets, &x[0], n, &k1[0])
            for i in range(n):
                tmp[i] = x[i] + 0.5 * dt * k1[i]
            _eval_system(exps, coefs, offsets, &tmp[0], n, &k2[0])
            for i in range(n):
                tmp[i] = x[i] + 0.5 * dt * k2[i]
            _eval_system(exps, coefs, offsets, &tmp[0], n, &k3[0])
            for i in range(n):
                tmp[i] = x[i] + dt * k3[i]
            _eval_system(exps, coefs, offsets, &tmp[0], n, &k4[0])
            for i in range(n):
                x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(x[i]):
                    bad = True
            if bad:
                break
            if stride > 0 and k % stride == 0:
                row += 1
                for i in range(n):
                    out[row, i] = x[i]
    if bad:
        raise FloatingPointError(f"non-finite state after {k} steps")
    return np.asarray(x)


cdef inline void _matvec(const double* J, const double* y, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += J[i * n + j] * y[j]
        out[i] = acc


def tangent_rk4(const cnp.int64_t[:, ::1] jexps, const double[::1] jcoefs, const cnp.int64_t[::1] joffsets,
                const double[:, ::1] xs, y0, double dt):
    cdef Py_ssize_t n = xs.shape[1], nsteps = (xs.shape[0] - 1) // 2, k, i
    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef double[::1] J0 = np.zeros(n * n)
    cdef double[::1] Jh = np.zeros(n * n)
    cdef double[::1] J1 = np.zeros(n * n)
    cdef double[::1] k1 = np.zeros(n)
    cdef double[::1] k2 = np.zeros(n)
    cdef double[::1] k3 = np.zeros(n)
    cdef double[::1] k4 = np.zeros(n)
    cdef double[::1] tmp = np.zeros(n)
    with nogil:
        _eval_system(jexps, jcoefs, joffsets, &xs[0, 0], n, &J1[0])
        for k in range(nsteps):
            for i in range(n * n):
                J0[i] = J1[i]
            _eval_system(jexps, jcoefs, joffsets, &xs[2 * k + 1, 0], n, &Jh[0])
            _eval_system(jexps, jcoefs, joffsets, &xs[2 * k + 2, 0], n, &J1[0])
            _matvec(&J0[0], &y[0], &k1[0], n)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * dt * k1[i]
            _matvec(&Jh[0], &tmp[0], &k2[0], n)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * dt * k2[i]
            _matvec(&Jh[0], &tmp[0], &k3[0], n)
            for i in range(n):
                tmp[i] = y[i] + dt * k3[i]
            _matvec(&J1[0], &tmp[0], &k4[0], n)
            for i in range(n):
                y[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return np.asarray(y)


def close_return(const double[:, ::1] xs, x0, double t0, double dt, double t_min, double eps):
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef Py_ssize_t N = xs.shape[0], n = xs.shape[1], k, j, i
    cdef Py_ssize_t kmin = int(np.ceil((t_min - t0) / dt - 1e-9))
    cdef Py_ssize_t found = -1
    cdef double d, dprev, dnext, diff
    if kmin < 1:
        kmin = 1
    with nogil:
        for k in range(kmin, N):
            d = 0.0
            for i in range(n):
                diff = xs[k, i] - x0v[i]
                d += diff * diff
            if sqrt(d) < eps:
                j = k
                dprev = d
                while j + 1 < N:
                    dnext = 0.0
                    for i in range(n):
                        diff = xs[j + 1, i] - x0v[i]
                        dnext += diff * diff
                    if dnext > dprev:
                        break
                    dprev = dnext
                    j += 1
                found = j
                break
    return found
