"""Primal-dual interior-point solver for block SDPs with free variables.

Problem convention (a minimization, documented once here)::

    primal:  minimize    c^T u
             subject to  A(X) + F u = b,   X = diag(X_1, ..., X_K) >= 0
    dual:    maximize    b^T y
             subject to  F^T y = c,   Z = -A^*(y) >= 0

``A(X)_i = sum_k <A_ik, X_k>`` with symmetric constraint matrices ``A_ik``.
The search direction is the Nesterov-Todd direction with a Mehrotra
predictor-corrector; free variables enter the KKT system directly.
"""

from __future__ import annotations

import logging
import math
import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import kernels

log = logging.getLogger(__name__)

STEP_FRACTION = 0.95
INFEASIBLE_DUAL_OBJ = 1e10
DIVERGENCE_FACTOR = 1e3
PRIMAL_REFINE_STEPS = 1


class SdpStructureError(ValueError):
    """Raised for structurally inconsistent problem data."""


@dataclass
class BlockEntries:
    """Upper-triangle entries of the constraint matrices of one PSD block.

    For each entry: ``A_{row}[p, q] = A_{row}[q, p] = val`` with ``p <= q``.
    """

    rows: np.ndarray
    p: np.ndarray
    q: np.ndarray
    val: np.ndarray

    @classmethod
    def from_triplets(cls, rows, p, q, val) -> "BlockEntries":
        rows = np.asarray(rows, dtype=np.int64)
        p = np.asarray(p, dtype=np.int64)
        q = np.asarray(q, dtype=np.int64)
        val = np.asarray(val, dtype=float)
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        if len(rows):
            # merge duplicates and sort by (row, p, q)
            key = np.stack([rows, lo, hi])
            uniq, inv = np.unique(key, axis=1, return_inverse=True)
            summed = np.zeros(uniq.shape[1])
            np.add.at(summed, inv.ravel(), val)
            keep = summed != 0.0
            rows, lo, hi, val = uniq[0][keep], uniq[1][keep], uniq[2][keep], summed[keep]
        return cls(
            np.ascontiguousarray(rows, dtype=np.int64),
            np.ascontiguousarray(lo, dtype=np.int64),
            np.ascontiguousarray(hi, dtype=np.int64),
            np.ascontiguousarray(val, dtype=float),
        )

    def scaled(self, row_scale: np.ndarray) -> "BlockEntries":
        return BlockEntries(self.rows, self.p, self.q, self.val * row_scale[self.rows])

    def subset_rows(self, keep_map: np.ndarray) -> "BlockEntries":
        """Renumber rows by ``keep_map`` (old -> new, -1 = drop)."""
        new = keep_map[self.rows]
        mask = new >= 0
        return BlockEntries(
            np.ascontiguousarray(new[mask]), self.p[mask].copy(), self.q[mask].copy(), self.val[mask].copy()
        )


@dataclass
class BlockSdp:
    """Block SDP data; see the module docstring for the sign convention."""

    block_dims: list
    blocks: list
    F: np.ndarray
    b: np.ndarray
    c: np.ndarray
    row_labels: list = field(default_factory=list)
    free_labels: list = field(default_factory=list)
    block_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        m = len(self.b)
        if self.F.ndim != 2 or self.F.shape[0] != m:
            if self.F.size == 0:
                self.F = np.zeros((m, len(self.c)))
            else:
                raise SdpStructureError(f"F must have {m} rows, got shape {self.F.shape}")
        if self.F.shape[1] != len(self.c):
            raise SdpStructureError("objective length must equal the number of free variables")
        if len(self.block_dims) != len(self.blocks):
            raise SdpStructureError("one entry list per block required")
        for d, blk in zip(self.block_dims, self.blocks):
            if len(blk.rows) and (blk.rows.min() < 0 or blk.rows.max() >= m):
                raise SdpStructureError("constraint row index out of range")
            if len(blk.p) and (blk.p.min() < 0 or blk.q.max() >= d or np.any(blk.p > blk.q)):
                raise SdpStructureError("block entry index out of range or not upper-triangular")

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def nfree(self) -> int:
        return len(self.c)

    def apply(self, X: list) -> np.ndarray:
        """A(X)."""
        out = np.zeros(self.m)
        for blk, Xk in zip(self.blocks, X):
            w = np.where(blk.p == blk.q, 1.0, 2.0)
            np.add.at(out, blk.rows, blk.val * w * Xk[blk.p, blk.q])
        return out

    def adjoint(self, y: np.ndarray) -> list:
        """A^*(y) as a list of symmetric matrices."""
        out = []
        for d, blk in zip(self.block_dims, self.blocks):
            S = np.zeros((d, d))
            np.add.at(S, (blk.p, blk.q), blk.val * y[blk.rows])
            S = S + S.T - np.diag(np.diag(S))
            out.append(S)
        return out

    def constraint_matrix(self, i: int) -> list:
        e = np.zeros(self.m)
        e[i] = 1.0
        return self.adjoint(e)

    def objective(self, u) -> float:
        return float(self.c @ u)


@dataclass
class SdpSolution:
    status: str
    primal_objective: float
    dual_objective: float
    X: list
    u: np.ndarray
    y: np.ndarray
    Z: list
    iterations: int
    gap: float
    primal_infeasibility: float
    dual_infeasibility: float
    log: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def min_eigenvalues(self) -> list:
        return [float(np.linalg.eigvalsh(Xk)[0]) if len(Xk) else 0.0 for Xk in self.X]


def _schur_weights(blk: BlockEntries) -> np.ndarray:
    return np.where(blk.p == blk.q, blk.val / math.sqrt(2.0), blk.val * math.sqrt(2.0))


def _nt_scaling(X, Z):
    """Return (G, lam) with W = G G^T, G^T Z G = G^-1 X G^-T = diag(lam)."""
    L = np.linalg.cholesky(X)
    T = L.T @ Z @ L
    T = 0.5 * (T + T.T)
    d, Q = np.linalg.eigh(T)
    if d[0] <= 0:
        raise np.linalg.LinAlgError("Z not positive definite")
    lam = np.sqrt(d)
    G = (L @ Q) * d ** -0.25
    Ginv = (Q.T * d[:, None] ** 0.25) @ linalg.solve_triangular(L, np.eye(len(L)), lower=True)
    return G, Ginv, lam


def _max_step(X, dX) -> float:
    """Largest alpha with X + alpha dX >= 0 (inf when dX is PSD)."""
    if X.shape[0] == 0:
        return math.inf
    L = linalg.cholesky(X, lower=True)
    T = linalg.solve_triangular(L, linalg.solve_triangular(L, dX, lower=True).T, lower=True)
    ev = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    return math.inf if ev >= 0 else -1.0 / ev


def _reduce_problem(p: BlockSdp, feas_tol: float):
    """Row scaling and elimination of rows that involve only free variables.

    Returns (scaled problem, row_scale, block_scale, keep_map, u0, T) where the free
    variables are u = u0 + T w and the reduced problem is in w.
    """
    m = p.m
    has_block = np.zeros(m, dtype=bool)
    for blk in p.blocks:
        has_block[blk.rows] = True
    scale, bscale = _equilibrate(p)
    rowmax = _row_max(p, scale, bscale)
    empty = rowmax == 0.0
    if np.any(empty & (np.abs(p.b) > 0)):
        raise _Infeasible("a constraint row with no variables has a nonzero right-hand side")
    scale = np.where(empty, 1.0, scale / np.where(empty, 1.0, rowmax))
    F = p.F * scale[:, None]
    b = p.b * scale
    pure = (~has_block) & (~empty)
    nfree = p.nfree
    u0 = np.zeros(nfree)
    T = np.eye(nfree)
    if np.any(pure):
        F0, b0 = F[pure], b[pure]
        u0, *_ = linalg.lstsq(F0, b0)
        if np.linalg.norm(F0 @ u0 - b0) > max(feas_tol, 1e-9) * (1 + np.linalg.norm(b0)):
            raise _Infeasible("linear equalities on the free variables are inconsistent")
        T = linalg.null_space(F0, rcond=1e-11)
    keep = has_block
    keep_map = -np.ones(m, dtype=np.int64)
    keep_map[keep] = np.arange(int(keep.sum()))
    Fk = F[keep] @ T
    bk = b[keep] - F[keep] @ u0
    # re-parametrize free variables by an orthogonal basis of range(F)
    if Fk.shape[1]:
        colnorm = np.linalg.norm(Fk, axis=0)
        colnorm[colnorm == 0] = 1.0
        U, s, Vt = linalg.svd(Fk / colnorm, full_matrices=False)
        r = int(np.sum(s > 1e-9 * (s[0] if len(s) else 0.0)))
        R = (Vt[:r].T / s[:r]) / colnorm[:, None]
        T = T @ R
        Fk = Fk @ R
    c_red = T.T @ p.c
    if nfree and p.m:
        nullF = linalg.null_space(F, rcond=1e-10)
        if nullF.shape[1] and np.linalg.norm(nullF.T @ p.c) > 1e-9 * (1 + np.linalg.norm(p.c)):
            log.warning("objective has a component along unconstrained free directions")
    blocks = [
        BlockEntries(blk.rows, blk.p, blk.q, blk.val * scale[blk.rows] * bs).subset_rows(keep_map)
        for blk, bs in zip(p.blocks, bscale)
    ]
    reduced = BlockSdp(list(p.block_dims), blocks, Fk, bk, c_red)
    return reduced, scale, bscale, keep_map, u0, T


def _row_max(p: BlockSdp, r, s) -> np.ndarray:
    out = np.abs(p.F).max(axis=1) * r if p.nfree else np.zeros(p.m)
    for blk, sk in zip(p.blocks, s):
        if len(blk.rows):
            np.maximum.at(out, blk.rows, np.abs(blk.val) * r[blk.rows] * sk)
    return out


def _equilibrate(p: BlockSdp):
    """Row factors r and one factor per PSD block.

    Each block is first normalized by its largest entry (a block scaled by s
    stands for X = s X', which keeps X' psd), then rows by their largest
    entry.  The block pass matters for multipliers of constraints with large
    coefficients, such as a ball R^2 - |x|^2 with large R.
    """
    s = np.ones(len(p.blocks))
    for k, blk in enumerate(p.blocks):
        if len(blk.val):
            s[k] = 1.0 / float(np.max(np.abs(blk.val)))
    return np.ones(p.m), s


class _Infeasible(Exception):
    pass


def solve(
    p: BlockSdp,
    gap_tol: float = 1e-8,
    feas_tol: float = 1e-8,
    max_iter: int = 200,
    verbose: bool = False,
) -> SdpSolution:
    """Solve a block SDP by the NT predictor-corrector method.

    Returns a solution whose ``status`` is one of ``optimal``,
    ``near_optimal``, ``infeasible_detected``, ``max_iter`` or
    ``numerical_failure``; a non-optimal status never carries a claim of
    optimality.
    """
    try:
        red, scale, bscale, keep_map, u0, T = _reduce_problem(p, feas_tol)
    except _Infeasible as exc:
        log.info("infeasible before iterating: %s", exc)
        return _failed(p, "infeasible_detected")
    iterlog: list = []
    m, K = red.m, len(red.block_dims)
    dims = red.block_dims
    ntot = sum(dims)
    start = 1.0 + (np.abs(red.b).max() if m else 0.0)
    X = [np.eye(d) * start for d in dims]
    Z = [np.eye(d) * start for d in dims]
    y = np.zeros(m)
    w = np.zeros(red.nfree)
    a_weights = [_schur_weights(blk) for blk in red.blocks]
    normb = 1.0 + np.linalg.norm(red.b)
    normc = 1.0 + np.linalg.norm(red.c)
    status = "max_iter"
    stall = 0
    best = None
    best_merit = math.inf

    def measures(X, Z, y, w):
        rp = red.b - red.apply(X) - red.F @ w
        ATy = red.adjoint(y)
        Rd = [-ATy[k] - Z[k] for k in range(K)]
        rf = red.c - red.F.T @ y
        pobj = float(red.c @ w)
        dobj = float(red.b @ y)
        pinf = np.linalg.norm(rp) / normb
        dinf = math.sqrt(sum(np.sum(R * R) for R in Rd) + float(rf @ rf)) / normc
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return rp, Rd, rf, pobj, dobj, pinf, dinf, gap

    it = 0
    for it in range(max_iter + 1):
        rp, Rd, rf, pobj, dobj, pinf, dinf, gap = measures(X, Z, y, w)
        mu = sum(float(np.sum(X[k] * Z[k])) for k in range(K)) / max(ntot, 1)
        entry = {"iter": it, "pobj": pobj, "dobj": dobj, "gap": gap, "pinf": pinf, "dinf": dinf, "mu": mu}
        merit = max(gap, pinf, dinf)
        if not math.isfinite(merit):
            status = "numerical_failure"
            iterlog.append(entry)
            break
        if merit < best_merit:
            best_merit, best = merit, (X, Z, y, w)
        elif merit > DIVERGENCE_FACTOR * best_merit and best_merit <= 1e-6:
            status = "numerical_failure"
            iterlog.append(entry)
            break
        if gap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            status = "optimal"
            iterlog.append(entry)
            break
        if dobj > INFEASIBLE_DUAL_OBJ and dinf <= 1e-6:
            status = "infeasible_detected"
            iterlog.append(entry)
            break
        if it == max_iter:
            iterlog.append(entry)
            break
        try:
            scal = [_nt_scaling(X[k], Z[k]) for k in range(K)]
            W = [G @ G.T for G, _, _ in scal]
            M = np.zeros((m, m))
            for k in range(K):
                blk = red.blocks[k]
                kernels.schur_accumulate(blk.rows, blk.p, blk.q, a_weights[k], np.ascontiguousarray(W[k]), M)
            kkt = _KktSolver(M, red.F)
        except (np.linalg.LinAlgError, linalg.LinAlgError, ValueError) as exc:
            log.debug("factorization failed at iteration %d: %s", it, exc)
            status = "numerical_failure"
            iterlog.append(entry)
            break

        try:
            with np.errstate(over="raise", invalid="raise"):
                dX, dy, dw, dZ, ap, ad, sigma = _step(red, X, Z, W, scal, Rd, rp, rf, kkt, mu, dims)
        except (np.linalg.LinAlgError, linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            log.debug("step computation failed at iteration %d: %s", it, exc)
            status = "numerical_failure"
            iterlog.append(entry)
            break
        entry.update(alpha_p=ap, alpha_d=ad, sigma=sigma)
        iterlog.append(entry)
        if verbose:
            log.info(
                "%3d pobj=% .10e dobj=% .10e gap=%.2e pinf=%.2e dinf=%.2e ap=%.3f ad=%.3f",
                it, pobj, dobj, gap, pinf, dinf, ap, ad,
            )
        X = [X[k] + ap * dX[k] for k in range(K)]
        w = w + ap * dw
        y = y + ad * dy
        Z = [Z[k] + ad * dZ[k] for k in range(K)]
        X = [0.5 * (Xk + Xk.T) for Xk in X]
        Z = [0.5 * (Zk + Zk.T) for Zk in Z]
        stall = stall + 1 if max(ap, ad) < 1e-6 else 0
        if stall >= 5:
            status = "numerical_failure"
            rp, Rd, rf, pobj, dobj, pinf, dinf, gap = measures(X, Z, y, w)
            iterlog.append({"iter": it + 1, "pobj": pobj, "dobj": dobj, "gap": gap, "pinf": pinf, "dinf": dinf, "mu": mu})
            break

    if status in ("max_iter", "numerical_failure") and best is not None:
        X, Z, y, w = best
    rp, Rd, rf, pobj, dobj, pinf, dinf, gap = measures(X, Z, y, w)
    if status in ("max_iter", "numerical_failure") and gap <= 1e-6 and pinf <= 1e-6 and dinf <= 1e-6:
        status = "near_optimal"
    X = [Xk * bs for Xk, bs in zip(X, bscale)]
    Z = [Zk / bs for Zk, bs in zip(Z, bscale)]
    u = u0 + T @ w
    y_full = np.zeros(p.m)
    kept = keep_map >= 0
    y_full[kept] = y[keep_map[kept]] * scale[kept]
    # multipliers of eliminated rows restore F^T y = c
    dropped = ~kept & np.any(p.F != 0.0, axis=1)
    if np.any(dropped):
        resid = p.c - p.F.T @ y_full
        y_full[dropped], *_ = linalg.lstsq(p.F[dropped].T, resid)
    return SdpSolution(
        status=status,
        primal_objective=float(p.c @ u),
        dual_objective=dobj + float(p.c @ u0),
        X=X,
        u=u,
        y=y_full,
        Z=Z,
        iterations=it,
        gap=gap,
        primal_infeasibility=pinf,
        dual_infeasibility=dinf,
        log=iterlog,
    )



def _step(red, X, Z, W, scal, Rd, rp, rf, kkt, mu, dims):
    """Mehrotra predictor-corrector direction and step lengths."""
    K = len(dims)
    ntot = max(sum(dims), 1)
    WRdW = [W[k] @ Rd[k] @ W[k] for k in range(K)]

    def direction(Rc):
        rhs1 = rp - red.apply([Rc[k] - WRdW[k] for k in range(K)])
        dy, dw = kkt.solve(rhs1, rf)
        ATdy = red.adjoint(dy)
        dZ = [Rd[k] - ATdy[k] for k in range(K)]
        dX = [Rc[k] - W[k] @ dZ[k] @ W[k] for k in range(K)]
        dX = [0.5 * (D + D.T) for D in dX]
        # refine against the primal residual computed from dX itself
        for _ in range(PRIMAL_REFINE_STEPS):
            e = rp - red.apply(dX) - red.F @ dw
            t, s = kkt.solve(e, np.zeros_like(rf))
            At = red.adjoint(t)
            dy = dy + t
            dw = dw + s
            dZ = [dZ[k] - At[k] for k in range(K)]
            dX = [dX[k] + W[k] @ At[k] @ W[k] for k in range(K)]
        return dX, dy, dw, dZ

    def steps(dX, dZ):
        ap = min(1.0, STEP_FRACTION * min((_max_step(X[k], dX[k]) for k in range(K)), default=math.inf))
        ad = min(1.0, STEP_FRACTION * min((_max_step(Z[k], dZ[k]) for k in range(K)), default=math.inf))
        return ap, ad

    dX, dy, dw, dZ = direction([-Xk for Xk in X])
    ap, ad = steps(dX, dZ)
    mu_aff = sum(float(np.sum((X[k] + ap * dX[k]) * (Z[k] + ad * dZ[k]))) for k in range(K)) / ntot
    sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
    # corrector in the scaled space
    Rc = []
    for k in range(K):
        G, Ginv, lam = scal[k]
        dXs = Ginv @ dX[k] @ Ginv.T
        dZs = G.T @ dZ[k] @ G
        R = sigma * mu * np.eye(dims[k]) - np.diag(lam * lam) - 0.5 * (dXs @ dZs + dZs @ dXs)
        H = 2.0 * R / (lam[:, None] + lam[None, :])
        Rc.append(G @ H @ G.T)
    dX, dy, dw, dZ = direction(Rc)
    ap, ad = steps(dX, dZ)
    return dX, dy, dw, dZ, ap, ad, sigma




def polish(p: BlockSdp, sol: SdpSolution, fixed=(0,), steps: int = 40, delta: float = 1e-8) -> SdpSolution:
    """Restore the equality constraints of a near-optimal primal point.

    Each step applies the correction of minimal norm in the metric
    W = X + delta*max|X|*I, i.e. dX = W A*(t) W, holding the free variables
    listed in ``fixed`` constant.  Steps stop once the residual stops
    shrinking.  Returns a new solution; the original is left untouched.
    """
    X = [np.array(Xk, dtype=float) for Xk in sol.X]
    u = np.array(sol.u, dtype=float)
    if not np.all(np.isfinite(u)) or p.m == 0:
        return sol
    rowmax = np.abs(p.F).max(axis=1) if p.nfree else np.zeros(p.m)
    for blk in p.blocks:
        if len(blk.rows):
            np.maximum.at(rowmax, blk.rows, np.abs(blk.val))
    scale = 1.0 / np.where(rowmax == 0.0, 1.0, rowmax)
    blocks = [blk.scaled(scale) for blk in p.blocks]
    sp = BlockSdp(list(p.block_dims), blocks, p.F * scale[:, None], p.b * scale, p.c)
    movable = np.ones(p.nfree, dtype=bool)
    movable[list(fixed)] = False
    Fm = sp.F[:, movable]
    a_weights = [_schur_weights(blk) for blk in blocks]
    xmax = max((float(np.abs(Xk).max()) for Xk in X if Xk.size), default=1.0)
    W = [Xk + delta * xmax * np.eye(len(Xk)) for Xk in X]
    M = Fm @ Fm.T
    for k, blk in enumerate(blocks):
        kernels.schur_accumulate(blk.rows, blk.p, blk.q, a_weights[k], np.ascontiguousarray(W[k]), M)
    try:
        L, _ = _shifted_cholesky(0.5 * (M + M.T))
    except linalg.LinAlgError:
        return sol
    r = sp.b - sp.apply(X) - sp.F @ u
    best = float(np.abs(r).max())
    for _ in range(steps):
        t = linalg.cho_solve((L, True), r)
        At = sp.adjoint(t)
        Xn = [X[k] + W[k] @ At[k] @ W[k] for k in range(len(X))]
        Xn = [0.5 * (Xk + Xk.T) for Xk in Xn]
        un = u.copy()
        un[movable] += Fm.T @ t
        rn = sp.b - sp.apply(Xn) - sp.F @ un
        if float(np.abs(rn).max()) >= best:
            break
        X, u, r, best = Xn, un, rn, float(np.abs(rn).max())
    pinf = float(np.linalg.norm(r) / (1.0 + np.linalg.norm(sp.b)))
    return dataclasses.replace(sol, X=X, u=u, primal_objective=float(p.c @ u), primal_infeasibility=pinf)

def _failed(p: BlockSdp, status: str) -> SdpSolution:
    nan = float("nan")
    return SdpSolution(
        status, nan, nan, [np.zeros((d, d)) for d in p.block_dims], np.full(p.nfree, nan),
        np.zeros(p.m), [np.zeros((d, d)) for d in p.block_dims], 0, nan, nan, nan, [],
    )


class _KktSolver:
    """Solves [[M, F], [F^T, 0]] [dy; dw] = [r1; r2] via Cholesky of M.

    Near the optimum M can lose definiteness numerically; the factorization
    then uses a small diagonal shift and the solve is refined against the
    unshifted system.
    """

    REFINE_STEPS = 3

    def __init__(self, M, F):
        M = 0.5 * (M + M.T)
        self.M = M
        self.L, shift_m = _shifted_cholesky(M)
        self.F = F
        shift_s = 0.0
        if F.shape[1]:
            self.Y = linalg.solve_triangular(self.L, F, lower=True)
            S = self.Y.T @ self.Y
            self.Ls, shift_s = _shifted_cholesky(0.5 * (S + S.T))
        self.shift = max(shift_m, shift_s)

    def _solve_once(self, r1, r2):
        if self.F.shape[1] == 0:
            return linalg.cho_solve((self.L, True), r1), np.zeros(0)
        v = linalg.solve_triangular(self.L, r1, lower=True)
        dw = linalg.cho_solve((self.Ls, True), self.Y.T @ v - r2)
        dy = linalg.cho_solve((self.L, True), r1 - self.F @ dw)
        return dy, dw

    def solve(self, r1, r2):
        dy, dw = self._solve_once(r1, r2)
        for _ in range(self.REFINE_STEPS):
            e1 = r1 - self.M @ dy - self.F @ dw
            e2 = r2 - self.F.T @ dy
            cy, cw = self._solve_once(e1, e2)
            dy, dw = dy + cy, dw + cw
        return dy, dw


def _shifted_cholesky(A):
    """Lower Cholesky factor of A + s*max(diag A)*I for the smallest s on a fixed ladder."""
    if len(A) == 0:
        return np.zeros((0, 0)), 0.0
    dmax = max(1e-300, float(np.abs(np.diag(A)).max()))
    for rel in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
        try:
            return linalg.cholesky(A + rel * dmax * np.eye(len(A)), lower=True), rel
        except linalg.LinAlgError:
            continue
    raise linalg.LinAlgError("matrix is not positive definite even after shifting")


_SDPA_NAMES = ("export_sdpa", "import_solution", "read_sdpa", "write_solution")


def __getattr__(name):
    # SDPA file I/O lives in .sdpa, which imports this module
    if name in _SDPA_NAMES:
        from . import sdpa

        return getattr(sdpa, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
