"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and results match the compiled versions; these are used when the
extension is not built or when ``LYAPCERT_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

_CHUNK = 2048


def schur_accumulate(rows, p, q, a, W, M):
    """M[r_e, r_f] += a_e a_f (W[p_e, p_f] W[q_e, q_f] + W[p_e, q_f] W[q_e, p_f]).

    ``rows, p, q, a`` list the upper-triangle entries of all constraint
    matrices of one block.  ``M`` is updated in place.
    """
    E = len(rows)
    if E == 0:
        return
    m = M.shape[0]
    S = sparse.csr_matrix((np.ones(E), (rows, np.arange(E))), shape=(m, E))
    for start in range(0, E, _CHUNK):
        sl = slice(start, min(E, start + _CHUNK))
        K = W[np.ix_(p[sl], p)] * W[np.ix_(q[sl], q)] + W[np.ix_(p[sl], q)] * W[np.ix_(q[sl], p)]
        K *= a[sl, None]
        K *= a[None, :]
        M += S[:, sl] @ np.asarray(S @ K.T).T


def fr_integrate(exps, coefs, offsets, nq, x0, dt, nsteps, c_coef, d_coef, out, stride):
    """Forest-Ruth steps for dq/dt = p, dp/dt = F(q).

    ``exps/coefs/offsets`` pack the force polynomials (one per momentum).
    Stores every ``stride``-th state into ``out`` (row 0 is x0).  Returns the
    final state.
    """
    x = np.array(x0, dtype=float)
    row = 0
    out[row] = x
    for k in range(1, nsteps + 1):
        _fr_step(exps, coefs, offsets, nq, x, dt, c_coef, d_coef)
        if stride > 0 and k % stride == 0:
            row += 1
            out[row] = x
    return x


def fr_integrate_mid(exps, coefs, offsets, nq, x0, dt, nsteps, c_coef, d_coef, out):
    """Forest-Ruth chain at step dt plus a half step from every stored state.

    ``out`` has 2*nsteps + 1 rows: even rows are the dt chain, odd rows the
    half-step states used as RK4 midpoints for tangent propagation.
    """
    x = np.array(x0, dtype=float)
    out[0] = x
    for k in range(nsteps):
        h = x.copy()
        _fr_step(exps, coefs, offsets, nq, h, 0.5 * dt, c_coef, d_coef)
        out[2 * k + 1] = h
        _fr_step(exps, coefs, offsets, nq, x, dt, c_coef, d_coef)
        out[2 * k + 2] = x
    return x


def _fr_step(exps, coefs, offsets, nq, x, dt, c_coef, d_coef):
    q = x[:nq]
    pm = x[nq:]
    for s in range(4):
        q += c_coef[s] * dt * pm
        if d_coef[s] != 0.0:
            pm += d_coef[s] * dt * _eval_force(exps, coefs, offsets, q)


def _eval_force(exps, coefs, offsets, q):
    out = np.zeros(len(offsets) - 1)
    for i in range(len(offsets) - 1):
        lo, hi = offsets[i], offsets[i + 1]
        if hi > lo:
            out[i] = np.dot(np.prod(q[None, :] ** exps[lo:hi], axis=1), coefs[lo:hi])
    return out


def eval_system(exps, coefs, offsets, x):
    return _eval_force(exps, coefs, offsets, np.asarray(x, dtype=float))


def rk4_integrate(exps, coefs, offsets, x0, dt, nsteps, out, stride):
    """Classical RK4 for dx/dt = f(x); same storage convention as ``fr_integrate``."""
    x = np.array(x0, dtype=float)
    row = 0
    out[row] = x
    f = lambda v: _eval_force(exps, coefs, offsets, v)  # noqa: E731
    for k in range(1, nsteps + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite state after {k} steps")
        if stride > 0 and k % stride == 0:
            row += 1
            out[row] = x
    return x


def tangent_rk4(jexps, jcoefs, joffsets, xs, y0, dt):
    """Propagate dy/dt = J(x(t)) y with RK4 along stored states.

    ``xs`` has shape (2*nsteps + 1, n): states at t_0, t_0 + dt/2, t_0 + dt, ...
    ``jexps/jcoefs/joffsets`` pack the n*n Jacobian entries row-major.
    """
    n = xs.shape[1]
    y = np.array(y0, dtype=float)
    nsteps = (xs.shape[0] - 1) // 2

    def J(x):
        return _eval_force(jexps, jcoefs, joffsets, x).reshape(n, n)

    Jnext = J(xs[0])
    for k in range(nsteps):
        J0 = Jnext
        Jh = J(xs[2 * k + 1])
        Jnext = J(xs[2 * k + 2])
        k1 = J0 @ y
        k2 = Jh @ (y + 0.5 * dt * k1)
        k3 = Jh @ (y + 0.5 * dt * k2)
        k4 = Jnext @ (y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def close_return(xs, x0, t0, dt, t_min, eps):
    """Index of the first discrete local minimum of |x_k - x0| below eps with t >= t_min, or -1."""
    d = np.linalg.norm(xs - x0[None, :], axis=1)
    kmin = int(np.ceil((t_min - t0) / dt - 1e-9))
    kmin = max(kmin, 1)
    for k in range(kmin, len(d)):
        if d[k] < eps:
            j = k
            while j + 1 < len(d) and d[j + 1] <= d[j]:
                j += 1
            return j
    return -1
