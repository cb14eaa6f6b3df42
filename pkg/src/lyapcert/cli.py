"""``lyapcert`` command-line tool.

Subcommands: ``bound``, ``export``, ``import-solution``, ``verify-orbits``
and ``check-symmetry``.  A problem comes either from a compiled-in preset
(``--preset lorenz|henon-heiles``) or from a JSON problem file
(``--problem``); see :class:`ProblemFile` for the schema.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import presets
from .dynamics import VectorField, build_tangent, fixed_point_les
from .polyalg import Polynomial, parse_polynomial
from .sdpa import SdpaFormatError, export_sdpa, import_solution
from .sdpsolve import SdpStructureError, polish
from .soscompile import (
    BoundResult,
    Degrees,
    SemialgebraicSet,
    SosAssemblyError,
    assemble_program,
    certificate_from_solution,
    fill_degrees,
    gramize,
    solve_program,
    uniform_degrees,
    verify_certificate,
)
from .symmetry import (
    check_equivariance,
    check_invariance,
    format_signed_generator,
    group_closure,
    lift_group,
    parse_signed_generator,
    trivial_group,
)
from .trajectory import hh_orbit_pipeline, orbits_to_csv, worker_count

log = logging.getLogger("lyapcert")

BOUND_COLUMNS = ["degree", "bound", "status", "gap", "residual", "min_eig", "wall_time_s"]
DEGREE_RULES = ("fill", "uniform")


class ProblemError(ValueError):
    pass


# problem files -------------------------------------------------------------


@dataclass
class ProblemFile:
    """JSON problem description.

    Keys: ``variables`` (names), ``field`` (one polynomial per variable),
    optional ``hamiltonian``, ``inequalities`` / ``equalities`` (g >= 0 and
    h = 0), ``symmetry`` (generators in signed-variable notation, e.g.
    ``["-x1", "-x2", "x3"]``), ``degrees`` (schedule of d values) and
    ``options``.  Recognized options: ``weight`` (n x n matrix),
    ``ball_radius``, ``degree_rule`` ("fill" or "uniform"), ``v_degree``,
    ``symmetric``, ``prune``, ``gap_tol``, ``feas_tol``, ``max_iter``,
    ``eig_tol``, ``res_tol``, ``fixed_point``, ``energy``.
    """

    variables: list
    field: list
    inequalities: list = field(default_factory=list)
    equalities: list = field(default_factory=list)
    symmetry: list = field(default_factory=list)
    degrees: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    hamiltonian: str | None = None
    name: str = ""

    KEYS = ("name", "variables", "field", "hamiltonian", "inequalities", "equalities", "symmetry", "degrees", "options")

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemFile":
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ProblemError(f"unknown problem keys: {sorted(unknown)}")
        for key in ("variables", "field"):
            if key not in d:
                raise ProblemError(f"problem file lacks {key!r}")
        pf = cls(
            variables=[str(v) for v in d["variables"]],
            field=[str(s) for s in d["field"]],
            inequalities=[str(s) for s in d.get("inequalities", [])],
            equalities=[str(s) for s in d.get("equalities", [])],
            symmetry=[[str(s) for s in g] for g in d.get("symmetry", [])],
            degrees=[int(v) for v in d.get("degrees", [])],
            options=dict(d.get("options", {})),
            hamiltonian=d.get("hamiltonian"),
            name=str(d.get("name", "")),
        )
        pf.validate()
        return pf

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "variables": list(self.variables),
            "field": list(self.field),
            "inequalities": list(self.inequalities),
            "equalities": list(self.equalities),
            "symmetry": [list(g) for g in self.symmetry],
            "degrees": list(self.degrees),
            "options": dict(self.options),
        }
        if self.hamiltonian is not None:
            out["hamiltonian"] = self.hamiltonian
        return out

    def validate(self) -> None:
        n = len(self.variables)
        if n == 0 or len(set(self.variables)) != n:
            raise ProblemError("variables must be a non-empty list of distinct names")
        if len(self.field) != n:
            raise ProblemError(f"{len(self.field)} field components for {n} variables")
        for text in self._polynomial_texts():
            try:
                parse_polynomial(text, self.variables)
            except ValueError as exc:
                raise ProblemError(f"bad polynomial {text!r}: {exc}") from None
        for g in self.symmetry:
            try:
                parse_signed_generator(g, self.variables)
            except ValueError as exc:
                raise ProblemError(str(exc)) from None
        if any(d < 1 for d in self.degrees):
            raise ProblemError("degrees must be positive")
        rule = self.options.get("degree_rule", "fill")
        if rule not in DEGREE_RULES:
            raise ProblemError(f"degree_rule must be one of {DEGREE_RULES}")

    def _polynomial_texts(self):
        yield from self.field
        yield from self.inequalities
        yield from self.equalities
        if self.hamiltonian is not None:
            yield self.hamiltonian

    def fingerprint(self) -> str:
        """Hash of everything that defines the bound except the degree schedule."""
        d = self.to_dict()
        d.pop("degrees")
        d.pop("name")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # construction

    def _poly(self, text: str) -> Polynomial:
        return parse_polynomial(text, self.variables)

    def vector_field(self) -> VectorField:
        H = self._poly(self.hamiltonian) if self.hamiltonian is not None else None
        return VectorField(tuple(self._poly(s) for s in self.field), tuple(self.variables), H)

    def semialgebraic_set(self) -> SemialgebraicSet:
        n = len(self.variables)
        g = [self._poly(s) for s in self.inequalities]
        R = self.options.get("ball_radius")
        if R is not None:
            ball = Polynomial.constant(float(R) ** 2, n)
            for i in range(n):
                ball = ball - Polynomial.variable(i, n) ** 2
            g.append(ball)
        return SemialgebraicSet(tuple(g), tuple(self._poly(s) for s in self.equalities), n)

    def group(self):
        n = len(self.variables)
        if not self.symmetry:
            return trivial_group(n)
        return group_closure([parse_signed_generator(g, self.variables) for g in self.symmetry], n)

    def degrees_for(self, ts, bset: SemialgebraicSet, d: int) -> Degrees:
        v_deg = self.options.get("v_degree")
        if self.options.get("degree_rule", "fill") == "uniform":
            return uniform_degrees(d, len(bset.inequalities), len(bset.equalities), v_deg)
        return fill_degrees(ts, bset, d, v_deg)

    def program(self, d: int):
        f = self.vector_field()
        ts = build_tangent(f, self.options.get("weight"))
        bset = self.semialgebraic_set()
        return assemble_program(
            ts, bset, self.degrees_for(ts, bset, d), self.group(), bool(self.options.get("symmetric", True))
        )

    def solver_options(self) -> dict:
        o = self.options
        return {
            "gap_tol": float(o.get("gap_tol", 1e-8)),
            "feas_tol": float(o.get("feas_tol", 1e-8)),
            "max_iter": int(o.get("max_iter", 200)),
            "prune": bool(o.get("prune", True)),
        }


def parse_problem(text: str) -> ProblemFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"problem file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ProblemError("problem file must hold a JSON object")
    return ProblemFile.from_dict(data)


def serialize_problem(pf: ProblemFile) -> str:
    return json.dumps(pf.to_dict(), indent=2, sort_keys=True) + "\n"


def load_problem(preset: str | None, path: str | None) -> ProblemFile:
    if (preset is None) == (path is None):
        raise ProblemError("give exactly one of --preset or --problem")
    if preset is not None:
        return ProblemFile.from_dict(presets.preset_problem(preset))
    return parse_problem(Path(path).read_text())


# output helpers ------------------------------------------------------------


def _num(v: float) -> str:
    # shortest repr that round-trips, so imported bounds compare exactly
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def bound_row(r: BoundResult) -> list[str]:
    status = r.status if r.certified else f"uncertified:{r.status}"
    bound = _num(r.bound) if r.certified else ""
    return [str(r.degree), bound, status, _num(r.gap), _num(r.residual), _num(r.min_eig), "%.3f" % r.wall_time_s]


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_pretty(text: str) -> str:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return ""
    widths = [max(len(r[i]) if i < len(r) else 0 for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows) + "\n"


def emit(text: str, out: str | None, pretty: bool) -> None:
    if out:
        Path(out).write_text(text)
    sys.stdout.write(render_pretty(text) if pretty else text)


# bound cache ---------------------------------------------------------------


def cache_path() -> Path:
    root = os.environ.get("LYAPCERT_CACHE") or os.path.join(os.path.expanduser("~"), ".cache", "lyapcert")
    return Path(root) / "bounds.json"


def _read_cache() -> dict:
    p = cache_path()
    try:
        return json.loads(p.read_text())
    except (OSError, json.JSONDecodeError):
        return {}


def record_bound(pf: ProblemFile, degree: int, bound: float) -> None:
    data = _read_cache()
    data.setdefault(pf.fingerprint(), {})[str(degree)] = bound
    p = cache_path()
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(data, indent=1, sort_keys=True))
    except OSError as exc:
        log.warning("could not update bound cache %s: %s", p, exc)


def best_cached_bound(pf: ProblemFile) -> float | None:
    entry = _read_cache().get(pf.fingerprint())
    return min(entry.values()) if entry else None


# commands ------------------------------------------------------------------


def _degrees(args, pf: ProblemFile) -> list[int]:
    if args.degrees is None:
        if not pf.degrees:
            raise ProblemError("no degrees given (use --degrees, e.g. --degrees 2,4)")
        return list(pf.degrees)
    try:
        ds = [int(s) for s in args.degrees.split(",") if s.strip()]
    except ValueError:
        raise ProblemError(f"--degrees must be a comma-separated list of integers, got {args.degrees!r}") from None
    if not ds:
        raise ProblemError("--degrees is empty; give e.g. --degrees 2,4")
    if any(d < 1 for d in ds):
        raise ProblemError("degrees must be positive")
    return ds


def run_bound(pf: ProblemFile, d: int, gap_tol: float | None = None) -> BoundResult:
    opts = pf.solver_options()
    if gap_tol is not None:
        opts["gap_tol"] = gap_tol
    t0 = time.perf_counter()
    try:
        program = pf.program(d)
    except SosAssemblyError as exc:
        log.error("degree %d: %s", d, exc)
        return BoundResult(d, math.nan, "assembly_error", math.nan, math.nan, math.nan, time.perf_counter() - t0, False)
    return solve_program(
        program,
        degree=d,
        eig_tol=float(pf.options.get("eig_tol", 1e-7)),
        res_tol=float(pf.options.get("res_tol", 1e-6)),
        **opts,
    )


def cmd_bound(args) -> int:
    pf = load_problem(args.preset, args.problem)
    ds = _degrees(args, pf)
    job = lambda d: run_bound(pf, d, args.gap_tol)  # noqa: E731
    nw = min(worker_count(), len(ds))
    if nw > 1:
        with ThreadPoolExecutor(nw) as pool:
            results = list(pool.map(job, ds))
    else:
        results = [job(d) for d in ds]
    for r in results:
        if r.certified:
            record_bound(pf, r.degree, r.bound)
        else:
            log.warning("degree %d: no certified bound (%s)", r.degree, r.status)
    emit(render_csv(BOUND_COLUMNS, [bound_row(r) for r in results]), args.out, args.pretty)
    return 0 if all(r.certified for r in results) else 1


def sidecar_path(path: str | os.PathLike) -> Path:
    return Path(str(path) + ".meta.json")


def _mono(m) -> list[int]:
    return [int(e) for e in m]


def cmd_export(args) -> int:
    pf = load_problem(args.preset, args.problem)
    ds = _degrees(args, pf)
    if len(ds) != 1:
        raise ProblemError("export takes a single degree")
    if not args.out:
        raise ProblemError("export needs --out <file.dat-s>")
    d = ds[0]
    problem = gramize(pf.program(d), prune=pf.solver_options()["prune"])
    export_sdpa(problem.sdp, args.out)
    digest = hashlib.sha256(Path(args.out).read_bytes()).hexdigest()
    meta = {
        "problem": pf.to_dict(),
        "degree": d,
        "prune": pf.solver_options()["prune"],
        "sdpa_sha256": digest,
        "m": problem.sdp.m,
        "n_free": problem.sdp.nfree,
        "blocks": [
            {"kind": b.kind, "index": b.index, "basis": [_mono(m) for m in b.basis]} for b in problem.gram_blocks
        ],
        "rows": [_mono(m) for m in problem.rows],
        "free": [str(s) for s in problem.sdp.free_labels],
        "sign_convention": "SDPA x = -y; SDPA objective = -bound",
    }
    sidecar_path(args.out).write_text(json.dumps(meta, indent=1) + "\n")
    sys.stdout.write(f"wrote {args.out} (m={problem.sdp.m}, blocks={problem.block_sizes}) and {sidecar_path(args.out)}\n")
    return 0


def cmd_import(args) -> int:
    meta_path = Path(args.sidecar) if args.sidecar else sidecar_path(args.sdpa)
    meta = json.loads(meta_path.read_text())
    if args.sdpa:
        digest = hashlib.sha256(Path(args.sdpa).read_bytes()).hexdigest()
        if digest != meta["sdpa_sha256"]:
            raise SdpStructureError("SDPA file does not match the sidecar (hash differs)")
    pf = ProblemFile.from_dict(meta["problem"])
    d = int(meta["degree"])
    t0 = time.perf_counter()
    problem = gramize(pf.program(d), prune=bool(meta["prune"]))
    if problem.sdp.m != meta["m"] or [_mono(m) for m in problem.rows] != meta["rows"]:
        raise SdpStructureError("rebuilt problem does not match the sidecar; was it exported by another version?")
    sol = import_solution(args.solution, problem.sdp)
    cert = certificate_from_solution(problem, sol)
    report = verify_certificate(cert, problem)
    if not report.passed:
        sol2 = polish(problem.sdp, sol)
        cert2 = certificate_from_solution(problem, sol2)
        report2 = verify_certificate(cert2, problem)
        if report2.passed:
            sol, cert, report = sol2, cert2, report2
    res = BoundResult(d, cert.bound, sol.status, sol.gap, report.residual, report.min_eig,
                      time.perf_counter() - t0, report.passed, problem, sol, cert, report)
    if res.certified:
        record_bound(pf, d, res.bound)
    emit(render_csv(BOUND_COLUMNS, [bound_row(res)]), args.out, args.pretty)
    return 0 if res.certified else 1


def _is_henon_heiles(pf: ProblemFile) -> bool:
    ref = ProblemFile.from_dict(presets.preset_problem("henon-heiles"))
    f, g = pf.vector_field(), ref.vector_field()
    return f.n == g.n and all(a.allclose(b) for a, b in zip(f.components, g.components))


def cmd_verify_orbits(args) -> int:
    pf = load_problem(args.preset, args.problem)
    bound = best_cached_bound(pf)
    fp = pf.options.get("fixed_point")
    if fp is not None and not _is_henon_heiles(pf):
        les = fixed_point_les(pf.vector_field(), fp)
        header = [f"x0_{i + 1}" for i in range(len(fp))] + ["mu1"] + [f"mu{i + 2}" for i in range(len(les) - 1)]
        text = render_csv(header, [[_num(v) for v in fp] + [_num(v) for v in les]])
        emit(text, args.out, args.pretty)
        _summary(les[0], bound)
        return 0
    if not _is_henon_heiles(pf):
        raise ProblemError("verify-orbits scans the Henon-Heiles section; other systems need options.fixed_point")
    f = pf.vector_field()
    if args.eps <= 0:
        log.warning("eps = %g admits no close returns; nothing to refine", args.eps)
        emit(orbits_to_csv([], f.n), args.out, args.pretty)
        return 1
    rep = hh_orbit_pipeline(
        n_ics=args.n_ics,
        t_max=args.t_max,
        eps=args.eps,
        dt=args.dt,
        seed=args.seed,
        energy=float(pf.options.get("energy", presets.HH_ENERGY)),
        f=f,
    )
    emit(orbits_to_csv(rep.estimates, f.n), args.out, args.pretty)
    for exc in rep.failures:
        log.warning("shooting failed: %s", exc)
    if not rep.estimates:
        log.warning("no periodic orbits found among %d initial conditions", args.n_ics)
        return 1
    best = max(rep.estimates, key=lambda e: e.mu1)
    _summary(best.mu1, bound, best.orbit.T)
    return 0 if not rep.failures else 1


def _summary(mu1: float, bound: float | None, T: float | None = None) -> None:
    where = f" (orbit T = {T:.10g})" if T is not None else " (fixed point)"
    if bound is None:
        sys.stderr.write(f"max mu1 = {mu1:.10g}{where}; no cached certified bound\n")
    else:
        rel = "<=" if mu1 <= bound else ">"
        sys.stderr.write(f"max mu1 = {mu1:.10g}{where} {rel} best certified bound {bound:.10g}\n")


def cmd_check_symmetry(args) -> int:
    pf = load_problem(args.preset, args.problem)
    f = pf.vector_field()
    G = pf.group()
    bset = pf.semialgebraic_set()
    ok = True
    for g in G.generators:
        eq = check_equivariance(f, np.diag(np.array(g, dtype=float)))
        ok &= eq
        print(f"generator {format_signed_generator(g, f.names)}: {'equivariant' if eq else 'NOT equivariant'}")
    for kind, polys in (("g", bset.inequalities), ("h", bset.equalities)):
        for i, p in enumerate(polys):
            inv = check_invariance(p, G)
            ok &= inv
            print(f"{kind}{i + 1}: {'invariant' if inv else 'NOT invariant'}")
    print(f"|G| = {G.order}, |G'| = {lift_group(G).order}")
    return 0 if ok else 1


# entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("problem")
    src.add_argument("--preset", choices=["lorenz", "henon-heiles"])
    src.add_argument("--problem", metavar="FILE", help="JSON problem file")
    common.add_argument("--degrees", help="comma-separated degree schedule, e.g. 2,4")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", metavar="FILE")
    common.add_argument("--pretty", action="store_true", help="aligned text instead of CSV on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="lyapcert", description="Certified bounds on maximal Lyapunov exponents.")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", parents=[common], help="solve the SOS program at each degree")
    b.add_argument("--gap-tol", type=float, default=None)
    b.set_defaults(func=cmd_bound)

    e = sub.add_parser("export", parents=[common], help="write the SDP in SDPA sparse format")
    e.set_defaults(func=cmd_export)

    i = sub.add_parser("import-solution", parents=[common], help="certify an external solver's solution")
    i.add_argument("solution", help="solution file (x vector then 'matno block i j value' lines)")
    i.add_argument("--sdpa", help="the exported .dat-s file (checked against the sidecar)")
    i.add_argument("--sidecar", help="metadata file written by export (default: <sdpa>.meta.json)")
    i.set_defaults(func=cmd_import)

    o = sub.add_parser("verify-orbits", parents=[common], help="periodic orbits and their leading exponents")
    o.add_argument("--dt", type=float, default=1e-3)
    o.add_argument("--eps", type=float, default=1e-3, help="close-return threshold")
    o.add_argument("--n-ics", type=int, default=121)
    o.add_argument("--t-max", type=float, default=33.0)
    o.set_defaults(func=cmd_verify_orbits)

    s = sub.add_parser("check-symmetry", parents=[common], help="check the declared symmetry group")
    s.set_defaults(func=cmd_check_symmetry)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "import-solution" and not (args.sdpa or args.sidecar):
        ap.error("import-solution needs --sdpa or --sidecar")
    try:
        return args.func(args)
    except ProblemError as exc:
        ap.error(str(exc))
    except (SdpStructureError, SdpaFormatError, OSError) as exc:
        sys.stderr.write(f"lyapcert: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
