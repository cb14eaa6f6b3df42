"""SDPA sparse (.dat-s) export and external-solution import.

The in-house problem

    min c^T u   s.t.   A(X) + F u = b,   X psd,  u free

is SDPA's dual form with Y = blockdiag(X, diag(u+, u-)):

    max <F0, Y>  s.t.  <F_i, Y> = b_i,   Y psd,

where F_i restricted to the Gram blocks is A_i, the trailing diagonal block
holds (F[i, :], -F[i, :]) and F0 = diag(-c, c) on that block only.  The SDPA
primal variable x therefore equals -y, and the SDPA optimal value is the
negated in-house optimum.

Solution files use the layout written by CSDP and SDPA's ``-p`` option:
the first non-comment line is the vector x (length m), followed by lines
``matno blkno i j value`` with matno 1 = Z (SDPA primal slack) and
matno 2 = Y.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .sdpsolve import BlockSdp, BlockEntries, SdpSolution, SdpStructureError


class SdpaFormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return "%.17g" % v


def _has_free_block(p: BlockSdp) -> bool:
    return p.nfree > 0


def export_sdpa(p: BlockSdp, path: str | os.PathLike) -> None:
    """Write ``p`` as an SDPA sparse file (17 significant digits)."""
    K = len(p.block_dims)
    nfree = p.nfree
    dims = [str(d) for d in p.block_dims]
    if _has_free_block(p):
        dims.append(str(-2 * nfree))
    lines = [
        str(p.m),
        str(len(dims)),
        " ".join(dims),
        " ".join(_fmt(v) for v in p.b),
    ]
    fb = K + 1
    # objective
    for j in range(nfree):
        if p.c[j] != 0.0:
            lines.append(f"0 {fb} {j + 1} {j + 1} {_fmt(-p.c[j])}")
            lines.append(f"0 {fb} {nfree + j + 1} {nfree + j + 1} {_fmt(p.c[j])}")
    # constraints, grouped by row then block
    per_row: list[list[str]] = [[] for _ in range(p.m)]
    for k, blk in enumerate(p.blocks):
        order = np.lexsort((blk.q, blk.p, blk.rows))
        for e in order:
            per_row[blk.rows[e]].append(
                f"{blk.rows[e] + 1} {k + 1} {blk.p[e] + 1} {blk.q[e] + 1} {_fmt(blk.val[e])}"
            )
    if nfree:
        rr, cc = np.nonzero(p.F)
        for i, j in zip(rr, cc):
            v = p.F[i, j]
            per_row[i].append(f"{i + 1} {fb} {j + 1} {j + 1} {_fmt(v)}")
            per_row[i].append(f"{i + 1} {fb} {nfree + j + 1} {nfree + j + 1} {_fmt(-v)}")
    for row in per_row:
        lines.extend(row)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _data_lines(path):
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            s = raw.strip()
            if not s or s[0] in '"*':
                continue
            yield s


def _numbers(s: str) -> list[str]:
    return s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ").split()


@dataclass
class SdpaProblem:
    """Raw contents of a .dat-s file: entries as (matno, blkno, i, j, value) with 1-based indices."""

    m: int
    block_dims: list
    rhs: np.ndarray
    entries: list


def read_sdpa(path: str | os.PathLike) -> SdpaProblem:
    lines = list(_data_lines(path))
    if len(lines) < 4:
        raise SdpaFormatError("file ends before the header is complete")
    m = int(_numbers(lines[0])[0])
    nb = int(_numbers(lines[1])[0])
    dims = [int(x) for x in _numbers(lines[2])[:nb]]
    rhs_tok = _numbers(lines[3])
    if len(dims) != nb or len(rhs_tok) < m:
        raise SdpaFormatError("header is truncated")
    rhs = np.array([float(x) for x in rhs_tok[:m]])
    entries = []
    for s in lines[4:]:
        t = _numbers(s)
        if len(t) != 5:
            raise SdpaFormatError(f"malformed entry line: {s!r}")
        entries.append((int(t[0]), int(t[1]), int(t[2]), int(t[3]), float(t[4])))
    return SdpaProblem(m, dims, rhs, entries)


def write_solution(sol: SdpSolution, p: BlockSdp, path: str | os.PathLike) -> None:
    """Write an in-house solution in the external solution layout (x = -y)."""
    K = len(p.block_dims)
    lines = [" ".join(_fmt(-v) for v in sol.y)]
    for matno, mats, free in ((1, sol.Z, _free_slack(sol, p)), (2, sol.X, _free_split(sol.u))):
        for k, A in enumerate(mats):
            iu, ju = np.triu_indices(len(A))
            for i, j in zip(iu, ju):
                if A[i, j] != 0.0:
                    lines.append(f"{matno} {k + 1} {i + 1} {j + 1} {_fmt(A[i, j])}")
        if _has_free_block(p):
            for i, v in enumerate(free):
                if v != 0.0:
                    lines.append(f"{matno} {K + 1} {i + 1} {i + 1} {_fmt(v)}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _free_split(u):
    u = np.asarray(u, dtype=float)
    return np.concatenate([np.maximum(u, 0.0), np.maximum(-u, 0.0)])


def _free_slack(sol, p):
    r = p.c - p.F.T @ sol.y
    return np.concatenate([r, -r])


def import_solution(path: str | os.PathLike, p: BlockSdp) -> SdpSolution:
    """Map an external solver's solution file back onto ``p``.

    Raises ``SdpaFormatError`` for unreadable or truncated files and
    ``SdpStructureError`` when the block structure does not match ``p``.
    """
    lines = list(_data_lines(path))
    if not lines:
        raise SdpaFormatError("empty solution file")
    try:
        x = np.array([float(t) for t in _numbers(lines[0])])
    except ValueError as exc:
        raise SdpaFormatError(f"bad dual vector line: {exc}") from None
    if len(x) != p.m:
        raise SdpStructureError(f"solution has {len(x)} constraint multipliers, problem has {p.m}")
    K = len(p.block_dims)
    nfree = p.nfree
    nblocks = K + (1 if nfree else 0)
    Zs = [np.zeros((d, d)) for d in p.block_dims]
    Ys = [np.zeros((d, d)) for d in p.block_dims]
    free_y = np.zeros(2 * nfree)
    seen = {1: False, 2: False}
    for s in lines[1:]:
        t = _numbers(s)
        if len(t) != 5:
            raise SdpaFormatError(f"truncated or malformed line: {s!r}")
        try:
            matno, blk, i, j = (int(v) for v in t[:4])
            v = float(t[4])
        except ValueError:
            raise SdpaFormatError(f"malformed line: {s!r}") from None
        if matno not in (1, 2):
            raise SdpaFormatError(f"unknown matrix number {matno}")
        if not 1 <= blk <= nblocks:
            raise SdpStructureError(f"block {blk} does not exist in the problem")
        seen[matno] = True
        if blk == K + 1:
            if i != j or not 1 <= i <= 2 * nfree:
                raise SdpStructureError("free-variable block entry out of range")
            if matno == 2:
                free_y[i - 1] = v
            continue
        d = p.block_dims[blk - 1]
        if not (1 <= i <= d and 1 <= j <= d):
            raise SdpStructureError(f"entry ({i},{j}) outside block {blk} of size {d}")
        A = Zs[blk - 1] if matno == 1 else Ys[blk - 1]
        A[i - 1, j - 1] = v
        A[j - 1, i - 1] = v
    if not seen[2]:
        raise SdpaFormatError("solution file has no primal matrix (matno 2)")
    y = -x
    u = free_y[:nfree] - free_y[nfree:]
    pobj = float(p.c @ u)
    dobj = float(p.b @ y)
    rp = p.b - p.apply(Ys) - p.F @ u
    ATy = p.adjoint(y)
    rd = np.sqrt(sum(float(np.sum((ATy[k] + Zs[k]) ** 2)) for k in range(K)) + float(np.sum((p.c - p.F.T @ y) ** 2)))
    pinf = float(np.linalg.norm(rp) / (1.0 + np.linalg.norm(p.b)))
    dinf = float(rd / (1.0 + np.linalg.norm(p.c)))
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    status = "optimal" if max(gap, pinf, dinf) <= 1e-6 else "near_optimal" if max(gap, pinf, dinf) <= 1e-4 else "max_iter"
    return SdpSolution(
        status=status,
        primal_objective=pobj,
        dual_objective=dobj,
        X=Ys,
        u=u,
        y=y,
        Z=Zs,
        iterations=0,
        gap=gap,
        primal_infeasibility=pinf,
        dual_infeasibility=dinf,
        log=[],
    )


def to_block_sdp(raw: SdpaProblem) -> BlockSdp:
    """Rebuild a BlockSdp from a file written by :func:`export_sdpa`.

    The trailing diagonal block, when present, is read back as free variables.
    """
    dims = raw.block_dims
    has_free = bool(dims) and dims[-1] < 0
    K = len(dims) - (1 if has_free else 0)
    nfree = -dims[-1] // 2 if has_free else 0
    trip = [([], [], [], []) for _ in range(K)]
    F = np.zeros((raw.m, nfree))
    c = np.zeros(nfree)
    for matno, blk, i, j, v in raw.entries:
        if blk <= K:
            if matno == 0:
                if v != 0.0:
                    raise SdpaFormatError("objective on a Gram block is not supported")
                continue
            r, pp, qq, vv = trip[blk - 1]
            r.append(matno - 1)
            pp.append(min(i, j) - 1)
            qq.append(max(i, j) - 1)
            vv.append(v)
        elif i <= nfree:
            if matno == 0:
                c[i - 1] = -v
            else:
                F[matno - 1, i - 1] = v
    blocks = [BlockEntries.from_triplets(r, pp, qq, vv) for r, pp, qq, vv in trip]
    return BlockSdp([abs(d) for d in dims[:K]], blocks, F, raw.rhs, c)
