"""Assembly of the Lyapunov-exponent SOS program and its translation to a block SDP.

The program minimizes the constant B such that

    P - sum_i sigma_i g_i - sum_j rho_j h_j  is SOS,   sigma_i SOS,

with P = B - phi - f.grad_x V - ell.grad_z V and h_0 = 1 - |z|^2 (or
1 - z^T A z for a weighted norm).  V, sigma_i, rho_j range over spans of
monomials; in symmetric mode those are restricted to monomials invariant
under the lifted sign group, and every SOS Gram matrix splits into one
block per character class.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TangentSystem
from .polyalg import Polynomial, basis_monomials, grlex_key
from .sdpsolve import BlockEntries, BlockSdp, SdpSolution, polish, solve
from .symmetry import (
    SignSymmetryGroup,
    character_classes,
    check_equivariance,
    check_invariance,
    lift_group,
    trivial_group,
)

log = logging.getLogger(__name__)

EIG_TOL = 1e-7
RES_TOL = 1e-6


class SosAssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class SemialgebraicSet:
    """{x : g_i(x) >= 0, h_j(x) = 0}; empty lists mean all of R^n."""

    inequalities: tuple = ()
    equalities: tuple = ()
    nvars: int = 1

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        for p in self.inequalities + self.equalities:
            if p.nvars != self.nvars:
                raise ValueError(f"set polynomial has {p.nvars} variables, expected {self.nvars}")


@dataclass(frozen=True)
class Degrees:
    """Maximum total degrees of the tunable polynomials.

    ``rho[0]`` is the multiplier of the sphere constraint h_0, followed by
    one entry per user equality.
    """

    v: int
    sigma: tuple = ()
    rho: tuple = (0,)


def uniform_degrees(d: int, n_ineq: int, n_eq: int, v_degree: int | None = None) -> Degrees:
    """Same maximum degree d for every tunable polynomial (V optionally fixed)."""
    return Degrees(d if v_degree is None else v_degree, (d,) * n_ineq, (d,) * (n_eq + 1))


def fill_degrees(ts: TangentSystem, bset: SemialgebraicSet, d: int, v_degree: int | None = None) -> Degrees:
    """deg V = d; multipliers fill up to the even constraint degree D."""
    dv = d if v_degree is None else v_degree
    dP = max(ts.phi.degree, _lie_degree(ts, dv))
    D = dP + (dP % 2)
    sig = []
    for g in bset.inequalities:
        ds = D - g.degree
        sig.append(max(0, ds - ds % 2))
    rho = [D - 2] + [max(0, D - h.degree) for h in bset.equalities]
    return Degrees(dv, tuple(sig), tuple(rho))


def _lie_degree(ts: TangentSystem, dv: int) -> int:
    if dv <= 0:
        return -1
    fdeg = max(c.degree for c in ts.base.components)
    ldeg = max(c.degree for c in ts.ell)
    return max(fdeg, ldeg) + dv - 1


@dataclass
class SosProgram:
    ts: TangentSystem
    bset: SemialgebraicSet
    degrees: Degrees
    group: SignSymmetryGroup
    symmetric: bool
    v_basis: list
    ineqs: list
    eqs: list
    sigma_bases: list
    rho_bases: list
    constraint_degree: int
    main_basis: list

    @property
    def nvars(self) -> int:
        return 2 * self.ts.n

    @property
    def sphere(self) -> Polynomial:
        return self.eqs[0]


def assemble_program(
    ts: TangentSystem,
    bset: SemialgebraicSet | None,
    degrees: Degrees,
    G: SignSymmetryGroup | None = None,
    symmetric: bool = True,
) -> SosProgram:
    """Build the SOS program bounding the maximal Lyapunov exponent.

    With ``symmetric=True`` the tunable polynomials are restricted to monomials
    invariant under the lift of ``G`` (trivial ``G`` still gives z -> -z).
    """
    n = ts.n
    N = 2 * n
    if bset is None:
        bset = SemialgebraicSet((), (), n)
    if bset.nvars != n:
        raise SosAssemblyError("set must be described in the state variables")
    if len(degrees.sigma) != len(bset.inequalities) or len(degrees.rho) != len(bset.equalities) + 1:
        raise SosAssemblyError("one degree per inequality multiplier and per equality multiplier (plus h0)")
    if degrees.v < 0 or any(d < 0 for d in degrees.sigma + degrees.rho):
        raise SosAssemblyError("degrees must be nonnegative")
    if G is None:
        G = trivial_group(n)
    if G.size != n:
        raise SosAssemblyError("symmetry group acts on the wrong number of variables")
    if symmetric:
        for L in G.matrices():
            if not check_equivariance(ts.base, L):
                raise SosAssemblyError(f"vector field is not equivariant under {np.diag(L).astype(int).tolist()}")
        for p in bset.inequalities + bset.equalities:
            if not check_invariance(p, G):
                raise SosAssemblyError("set polynomials must be invariant under the symmetry group")
        if ts.weight is not None:
            for L in G.matrices():
                if not np.allclose(L @ ts.weight @ L, ts.weight):
                    raise SosAssemblyError("weight matrix does not commute with the symmetry group")
        Gp = lift_group(G)
    else:
        Gp = trivial_group(N)

    def invariant_basis(deg):
        return [m for m in basis_monomials(N, deg) if Gp.is_invariant_monomial(m)]

    v_basis = invariant_basis(degrees.v)
    if not v_basis:
        raise SosAssemblyError("empty auxiliary-function basis")
    lift = list(range(n))
    ineqs = [g.map_variables(lift, N) for g in bset.inequalities]
    eqs = [ts.sphere()] + [h.map_variables(lift, N) for h in bset.equalities]
    sigma_bases = [basis_monomials(N, d // 2) for d in degrees.sigma]
    rho_bases = [invariant_basis(d) for d in degrees.rho]

    dP = max(ts.phi.degree, _lie_degree(ts, degrees.v))
    dmax = max(
        [dP]
        + [2 * (d // 2) + g.degree for d, g in zip(degrees.sigma, ineqs)]
        + [d + h.degree for d, h in zip(degrees.rho, eqs)]
    )
    D = dmax + (dmax % 2)
    main_basis = basis_monomials(N, D // 2)
    return SosProgram(ts, bset, degrees, Gp, symmetric, v_basis, ineqs, eqs, sigma_bases, rho_bases, D, main_basis)


@dataclass
class GramBlock:
    kind: str  # "main" or "sigma"
    index: int  # sigma index (0 for main)
    basis: list


@dataclass
class SdpProblem:
    """Compiled SDP plus the bookkeeping to map a solution back to polynomials."""

    sdp: BlockSdp
    program: SosProgram
    gram_blocks: list
    rows: list
    v_monomials: list
    rho_slices: list
    v_slice: slice

    @property
    def block_sizes(self) -> list:
        return [len(b.basis) for b in self.gram_blocks]


def _prune_main_basis(basis, support, n):
    """Drop Gram monomials outside half the Newton polytope's degree bounds."""
    if not support:
        return basis
    S = np.array(support, dtype=np.int64)
    N = S.shape[1]
    functionals = [np.ones(N, dtype=np.int64)]
    functionals += [np.eye(N, dtype=np.int64)[i] for i in range(N)]
    functionals.append(np.r_[np.ones(n, dtype=np.int64), np.zeros(N - n, dtype=np.int64)])
    functionals.append(np.r_[np.zeros(n, dtype=np.int64), np.ones(N - n, dtype=np.int64)])
    Fm = np.array(functionals)
    upper = (S @ Fm.T).max(axis=0)
    B = np.array(basis, dtype=np.int64)
    ok = np.all(2 * (B @ Fm.T) <= upper[None, :], axis=1)
    return [m for m, keep in zip(basis, ok) if keep]


def gramize(program: SosProgram, prune: bool = False) -> SdpProblem:
    """Translate the SOS program into a block SDP.

    Each SOS polynomial gets one PSD block per character class of its Gram
    basis; equality rows match the coefficient of every monomial of the
    constraint identity.
    """
    ts = program.ts
    N = program.nvars
    n = ts.n
    Gp = program.group

    lie = []
    v_monos = []
    for m in program.v_basis:
        L = ts.lie_derivative(Polynomial.monomial(m))
        if len(L):
            lie.append(L)
            v_monos.append(m)
    rho_polys = [[Polynomial.monomial(m) * h for m in basis] for basis, h in zip(program.rho_bases, program.eqs)]

    sigma_terms = [g.sorted_terms() for g in program.ineqs]
    structural = set(ts.phi.support())
    structural.add((0,) * N)
    for L in lie:
        structural.update(L.support())
    for polys in rho_polys:
        for p in polys:
            structural.update(p.support())
    sigma_blocks = []
    for i, basis in enumerate(program.sigma_bases):
        for cls in character_classes(basis, Gp):
            sigma_blocks.append(GramBlock("sigma", i, [basis[k] for k in cls]))
    for blk in sigma_blocks:
        Bm = np.array(blk.basis, dtype=np.int64)
        for gm, _ in sigma_terms[blk.index]:
            prods = Bm[:, None, :] + Bm[None, :, :] + np.array(gm, dtype=np.int64)
            structural.update(map(tuple, prods.reshape(-1, N).tolist()))

    main_basis = program.main_basis
    if prune:
        main_basis = _prune_main_basis(main_basis, sorted(structural), n)
    main_blocks = [GramBlock("main", 0, [main_basis[k] for k in cls]) for cls in character_classes(main_basis, Gp)]
    gram_blocks = main_blocks + sigma_blocks

    monos = set(structural)
    for blk in main_blocks:
        Bm = np.array(blk.basis, dtype=np.int64)
        prods = Bm[:, None, :] + Bm[None, :, :]
        monos.update(map(tuple, prods.reshape(-1, N).tolist()))
    rows = sorted(monos, key=grlex_key)
    row_of = {m: i for i, m in enumerate(rows)}
    nrows = len(rows)

    # free variables: B, V coefficients, rho coefficients
    nv = len(v_monos)
    nrho = [len(b) for b in program.rho_bases]
    nfree = 1 + nv + sum(nrho)
    F = np.zeros((nrows, nfree))
    F[row_of[(0,) * N], 0] = -1.0
    for k, L in enumerate(lie):
        for m, c in L.terms.items():
            F[row_of[m], 1 + k] += c
    rho_slices = []
    col = 1 + nv
    for polys in rho_polys:
        rho_slices.append(slice(col, col + len(polys)))
        for p in polys:
            for m, c in p.terms.items():
                F[row_of[m], col] += c
            col += 1
    b = np.zeros(nrows)
    for m, c in ts.phi.terms.items():
        b[row_of[m]] -= c

    entries = []
    for blk in gram_blocks:
        d = len(blk.basis)
        iu, ju = np.triu_indices(d)
        Bm = np.array(blk.basis, dtype=np.int64).reshape(d, N)
        base = Bm[iu] + Bm[ju]
        if blk.kind == "main":
            r = [row_of[tuple(x)] for x in base.tolist()]
            entries.append(BlockEntries.from_triplets(r, iu, ju, np.ones(len(r))))
        else:
            rr, pp, qq, vv = [], [], [], []
            for gm, gc in sigma_terms[blk.index]:
                shifted = base + np.array(gm, dtype=np.int64)
                rr.extend(row_of[tuple(x)] for x in shifted.tolist())
                pp.append(iu)
                qq.append(ju)
                vv.append(np.full(len(iu), gc))
            entries.append(
                BlockEntries.from_triplets(rr, np.concatenate(pp), np.concatenate(qq), np.concatenate(vv))
            )
    c = np.zeros(nfree)
    c[0] = 1.0
    names = ts.names()
    free_labels = ["B"] + [f"V[{Polynomial.monomial(m).to_text(names)}]" for m in v_monos]
    for j, basis in enumerate(program.rho_bases):
        free_labels += [f"rho{j}[{Polynomial.monomial(m).to_text(names)}]" for m in basis]
    block_labels = [f"{blk.kind}{blk.index if blk.kind == 'sigma' else ''}:{len(blk.basis)}" for blk in gram_blocks]
    sdp = BlockSdp(
        [len(blk.basis) for blk in gram_blocks],
        entries,
        F,
        b,
        c,
        row_labels=[Polynomial.monomial(m).to_text(names) for m in rows],
        free_labels=free_labels,
        block_labels=block_labels,
    )
    return SdpProblem(sdp, program, gram_blocks, rows, v_monos, rho_slices, slice(1, 1 + nv))


# certificates -------------------------------------------------------------


@dataclass
class Certificate:
    bound: float
    V: Polynomial
    sigmas: list
    rhos: list
    grams: list  # (GramBlock, matrix)

    def bases(self):
        return [(g.kind, g.index, tuple(g.basis)) for g, _ in self.grams]


@dataclass
class VerificationReport:
    passed: bool
    residual: float
    min_eig: float
    bound: float
    worst_monomial: tuple | None = None

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}: bound={self.bound:.10g} residual={self.residual:.3e} min_eig={self.min_eig:.3e}"


def _gram_polynomial(basis, Q, N) -> Polynomial:
    acc: dict = {}
    d = len(basis)
    for i in range(d):
        for j in range(d):
            v = Q[i, j]
            if v == 0.0:
                continue
            m = tuple(a + b for a, b in zip(basis[i], basis[j]))
            acc[m] = acc.get(m, 0.0) + v
    return Polynomial(acc, N, prune=False)


def certificate_from_solution(problem: SdpProblem, sol: SdpSolution) -> Certificate:
    prog = problem.program
    N = prog.nvars
    u = np.asarray(sol.u, dtype=float)
    V = Polynomial({m: float(c) for m, c in zip(problem.v_monomials, u[problem.v_slice])}, N)
    rhos = [
        Polynomial({m: float(c) for m, c in zip(basis, u[sl])}, N)
        for basis, sl in zip(prog.rho_bases, problem.rho_slices)
    ]
    grams = [(blk, np.array(X, dtype=float)) for blk, X in zip(problem.gram_blocks, sol.X)]
    sigmas = []
    for i in range(len(prog.ineqs)):
        acc = Polynomial.zero(N)
        for blk, Q in grams:
            if blk.kind == "sigma" and blk.index == i:
                acc = acc + _gram_polynomial(blk.basis, Q, N)
        sigmas.append(acc)
    return Certificate(float(u[0]), V, sigmas, rhos, grams)


def _check_bases_within(cert: Certificate, prog: SosProgram) -> None:
    # pruned Gram bases are subsets of the full ones
    main = set(prog.main_basis)
    for blk, Q in cert.grams:
        allowed = main if blk.kind == "main" else None
        if blk.kind == "sigma":
            if not 0 <= blk.index < len(prog.sigma_bases):
                raise ValueError("certificate references a nonexistent multiplier")
            allowed = set(prog.sigma_bases[blk.index])
        if not set(blk.basis) <= allowed or Q.shape != (len(blk.basis),) * 2:
            raise ValueError("certificate Gram bases do not match the program")
    if not set(cert.V.support()) <= set(prog.v_basis):
        raise ValueError("certificate V uses monomials outside the program basis")


def verify_certificate(
    cert: Certificate,
    problem: SdpProblem | SosProgram,
    eig_tol: float = EIG_TOL,
    res_tol: float = RES_TOL,
) -> VerificationReport:
    """Recompute the constraint identity from the certificate's polynomials.

    The residual is the largest coefficient of
    P - sum sigma_i g_i - sum rho_j h_j - (main Gram form), where P is rebuilt
    from V and the bound, and each sigma_i is rebuilt from its own Gram blocks.
    """
    if isinstance(problem, SdpProblem):
        prog = problem.program
        expected = [(g.kind, g.index, tuple(g.basis)) for g in problem.gram_blocks]
        if cert.bases() != expected:
            raise ValueError("certificate Gram bases do not match the program")
    else:
        prog = problem
        _check_bases_within(cert, prog)
    if len(cert.rhos) != len(prog.eqs):
        raise ValueError("certificate has the wrong number of equality multipliers")
    N = prog.nvars
    ts = prog.ts
    ident = cert.bound - ts.phi - ts.lie_derivative(cert.V)
    sig_acc = [Polynomial.zero(N) for _ in prog.ineqs]
    main = Polynomial.zero(N)
    min_eig = math.inf
    for blk, Q in cert.grams:
        Qs = 0.5 * (Q + Q.T)
        if len(Qs):
            min_eig = min(min_eig, float(np.linalg.eigvalsh(Qs)[0]))
        poly = _gram_polynomial(blk.basis, Qs, N)
        if blk.kind == "main":
            main = main + poly
        else:
            sig_acc[blk.index] = sig_acc[blk.index] + poly
    for s, g in zip(sig_acc, prog.ineqs):
        ident = ident - s * g
    for r, h in zip(cert.rhos, prog.eqs):
        ident = ident - r * h
    ident = ident - main
    terms = ident.terms
    if terms:
        worst = max(terms, key=lambda m: abs(terms[m]))
        residual = abs(terms[worst])
    else:
        worst, residual = None, 0.0
    if not math.isfinite(min_eig):
        min_eig = 0.0
    passed = bool(residual <= res_tol and min_eig >= -eig_tol and math.isfinite(cert.bound))
    return VerificationReport(passed, residual, min_eig, cert.bound, worst)


# end-to-end ---------------------------------------------------------------


@dataclass
class BoundResult:
    degree: int
    bound: float
    status: str
    gap: float
    residual: float
    min_eig: float
    wall_time_s: float
    certified: bool
    problem: SdpProblem | None = field(default=None, repr=False)
    solution: SdpSolution | None = field(default=None, repr=False)
    certificate: Certificate | None = field(default=None, repr=False)
    report: VerificationReport | None = None


def solve_program(
    program: SosProgram,
    degree: int | None = None,
    prune: bool = True,
    gap_tol: float = 1e-8,
    feas_tol: float = 1e-8,
    max_iter: int = 200,
    eig_tol: float = EIG_TOL,
    res_tol: float = RES_TOL,
    verbose: bool = False,
) -> BoundResult:
    """gramize -> solve -> verify; the bound is certified only if verification passes."""
    t0 = time.perf_counter()
    problem = gramize(program, prune=prune)
    log.info("SDP: %d rows, %d free, blocks %s", problem.sdp.m, problem.sdp.nfree, problem.block_sizes)
    sol = solve(problem.sdp, gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter, verbose=verbose)
    deg = degree if degree is not None else program.degrees.v
    if sol.status == "infeasible_detected" or not np.all(np.isfinite(sol.u)):
        return BoundResult(deg, float("nan"), sol.status, sol.gap, float("nan"), float("nan"),
                           time.perf_counter() - t0, False, problem, sol)
    cert = certificate_from_solution(problem, sol)
    report = verify_certificate(cert, problem, eig_tol, res_tol)
    if not report.passed:
        polished = polish(problem.sdp, sol)
        cert2 = certificate_from_solution(problem, polished)
        report2 = verify_certificate(cert2, problem, eig_tol, res_tol)
        log.info("polishing: residual %.2e -> %.2e, min eig %.2e -> %.2e",
                 report.residual, report2.residual, report.min_eig, report2.min_eig)
        if report2.passed:
            sol, cert, report = polished, cert2, report2
    # validity rests on the independent check, not on the solver's own status
    certified = report.passed
    return BoundResult(
        deg, cert.bound, sol.status, sol.gap, report.residual, report.min_eig,
        time.perf_counter() - t0, certified, problem, sol, cert, report,
    )
