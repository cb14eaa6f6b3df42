"""Periodic-orbit search and leading Lyapunov exponents by direct integration.

Hamiltonian systems (``VectorField.hamiltonian`` set, positions first,
momenta second, dq/dt = p) are integrated with the fourth-order Forest-Ruth
composition; everything else uses classical RK4.  Tangent vectors are always
advanced by RK4 along the stored base trajectory.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import kernels
from .dynamics import VectorField, jacobian
from .polyalg import Polynomial

log = logging.getLogger(__name__)

FR_THETA = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
FR_C = np.array([FR_THETA / 2, (1 - FR_THETA) / 2, (1 - FR_THETA) / 2, FR_THETA / 2])
FR_D = np.array([FR_THETA, 1 - 2 * FR_THETA, FR_THETA, 0.0])

DT_TARGET = 1e-3
HH_ENERGY = 1.0 / 7.0


class ShootingError(RuntimeError):
    """Raised when shooting stalls above tolerance; ``best`` holds the best orbit found."""

    def __init__(self, message: str, best: "Orbit"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray


@dataclass(frozen=True)
class Orbit:
    x0: np.ndarray
    T: float
    residual: float
    energy: float = float("nan")


@dataclass(frozen=True)
class LeEstimate:
    orbit: Orbit
    mu1: float
    iterations: int
    direction_residual: float
    seed: int
    converged: bool = True


def worker_count(default: int | None = None) -> int:
    """Worker-pool size, capped by ``LYAPCERT_THREADS`` when set."""
    n = default or os.cpu_count() or 1
    env = os.environ.get("LYAPCERT_THREADS", "").strip()
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            log.warning("ignoring non-integer LYAPCERT_THREADS=%r", env)
    return n


def pack(polys, nvars: int):
    """Concatenate polynomials into (exps, coefs, offsets) arrays for the kernels."""
    exps, coefs, offsets = [], [], [0]
    for p in polys:
        if p.nvars < nvars:
            raise ValueError("polynomial has fewer variables than requested")
        e, c = p.arrays()
        if p.nvars > nvars:
            if len(e) and np.any(e[:, nvars:]):
                raise ValueError("polynomial depends on variables beyond the packed range")
            e = e[:, :nvars]
        exps.append(e)
        coefs.append(c)
        offsets.append(offsets[-1] + len(c))
    E = np.ascontiguousarray(np.vstack(exps) if exps else np.zeros((0, nvars)), dtype=np.int64)
    if E.shape[0] == 0:
        E = np.zeros((0, nvars), dtype=np.int64)
    C = np.ascontiguousarray(np.concatenate(coefs) if coefs else np.zeros(0), dtype=float)
    return E, C, np.asarray(offsets, dtype=np.int64)


def _force_split(f: VectorField):
    """Check the (q, p) separable structure and return packed forces F(q)."""
    n = f.n
    if n % 2:
        raise ValueError("a separable Hamiltonian system needs an even number of variables")
    nq = n // 2
    for i in range(nq):
        if not f.components[i].allclose(Polynomial.variable(nq + i, n), atol=0.0):
            raise ValueError(f"component {i} is not dq/dt = p; the system is not declared separable")
    forces = f.components[nq:]
    for c in forces:
        for m in c.support():
            if any(m[nq:]):
                raise ValueError("forces depend on momenta; the system is not separable")
    return nq, pack(forces, nq)


def is_separable(f: VectorField) -> bool:
    try:
        _force_split(f)
    except ValueError:
        return False
    return True


def _steps(t_span, dt):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    L = t1 - t0
    n = int(math.floor(L / dt + 1e-9))
    rem = L - n * dt
    if rem <= 1e-12 * max(1.0, L):
        rem = 0.0
    return t0, t1, n, rem


def _sample_times(t0, t1, n, rem, dt, stride):
    ts = t0 + dt * np.arange(0, n + 1, stride)
    if rem or (n % stride):
        ts = np.append(ts, t1)
    return ts


def integrate_rk4(f, x0, t_span, dt: float, stride: int = 1) -> Trajectory:
    """Classical RK4 from t_span[0] to t_span[1]; the last step is shortened to land on t_span[1].

    ``f`` is a VectorField, or a callable ``A(t)`` returning a matrix for the
    linear system dx/dt = A(t) x.
    """
    t0, t1, n, rem = _steps(t_span, dt)
    x0 = np.asarray(x0, dtype=float)
    if not isinstance(f, VectorField):
        return _rk4_linear(f, x0, t0, t1, n, rem, dt, stride)
    E, C, O = pack(f.components, f.n)
    rows = n // stride + 1
    out = np.empty((rows, len(x0)))
    x = kernels.rk4_integrate(E, C, O, x0, dt, n, out, stride)
    xs = [out]
    if n % stride or rem:
        if rem:
            x = kernels.rk4_integrate(E, C, O, x, rem, 1, np.empty((2, len(x0))), 0)
        xs.append(np.asarray(x)[None, :])
    return Trajectory(_sample_times(t0, t1, n, rem, dt, stride), np.vstack(xs))


def _rk4_linear(A, x0, t0, t1, n, rem, dt, stride):
    x = x0.copy()
    samples = [x.copy()]
    t = t0
    steps = [dt] * n + ([rem] if rem else [])
    for k, h in enumerate(steps, start=1):
        k1 = A(t) @ x
        k2 = A(t + h / 2) @ (x + h / 2 * k1)
        k3 = A(t + h / 2) @ (x + h / 2 * k2)
        k4 = A(t + h) @ (x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite state after {k} steps")
        if k % stride == 0 or k == len(steps):
            samples.append(x.copy())
    return Trajectory(_sample_times(t0, t1, n, rem, dt, stride), np.array(samples))


def integrate_forest_ruth(f: VectorField, x0, t_span, dt: float, stride: int = 1) -> Trajectory:
    """Fourth-order Forest-Ruth integration of a separable Hamiltonian system."""
    nq, (E, C, O) = _force_split(f)
    t0, t1, n, rem = _steps(t_span, dt)
    x0 = np.asarray(x0, dtype=float)
    out = np.empty((n // stride + 1, len(x0)))
    x = kernels.fr_integrate(E, C, O, nq, x0, dt, n, FR_C, FR_D, out, stride)
    xs = [out]
    if n % stride or rem:
        if rem:
            x = kernels.fr_integrate(E, C, O, nq, x, rem, 1, FR_C, FR_D, np.empty((2, len(x0))), 0)
        xs.append(np.asarray(x)[None, :])
    return Trajectory(_sample_times(t0, t1, n, rem, dt, stride), np.vstack(xs))


def _flow_end(f: VectorField, x0, T: float, dt: float) -> np.ndarray:
    if is_separable(f):
        return integrate_forest_ruth(f, x0, (0.0, T), dt, stride=10**9).x[-1]
    return integrate_rk4(f, x0, (0.0, T), dt, stride=10**9).x[-1]


# Henon-Heiles initial conditions ------------------------------------------


def hh_initial_curve(x1: float, E: float = HH_ENERGY) -> np.ndarray:
    """State (x1, x2, 0, 0) on H = E with x1^2 + x2^2 < 1, smallest |x2| among admissible roots."""
    x1 = float(x1)
    # -x2^3/3 + x2^2/2 + x1^2 x2 + x1^2/2 - E = 0
    coeffs = [-1.0 / 3.0, 0.5, x1 * x1, 0.5 * x1 * x1 - E]
    roots = np.roots(coeffs)
    cands = []
    for r in roots:
        if abs(r.imag) > 1e-7:
            continue
        x2 = float(r.real)
        for _ in range(3):  # Newton polish
            g = -x2**3 / 3 + x2**2 / 2 + x1 * x1 * x2 + 0.5 * x1 * x1 - E
            dg = -(x2**2) + x2 + x1 * x1
            if dg == 0.0:
                break
            x2 -= g / dg
        if x1 * x1 + x2 * x2 < 1.0:
            cands.append(x2)
    if not cands:
        raise ValueError(f"no admissible root on H = {E} at x1 = {x1}")
    x2 = min(cands, key=abs)
    return np.array([x1, x2, 0.0, 0.0])


def hh_curve_extent(E: float = HH_ENERGY) -> float:
    """Largest |x1| for which :func:`hh_initial_curve` has a root."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        try:
            hh_initial_curve(mid, E)
            lo = mid
        except ValueError:
            hi = mid
    return lo


def hh_scan_ics(n: int = 121, E: float = HH_ENERGY) -> list[np.ndarray]:
    """``n`` initial conditions evenly spaced in x1 across the admissible range of the H = E curve."""
    a = hh_curve_extent(E)
    xs = np.linspace(-a, a, n + 2)[1:-1]
    return [hh_initial_curve(x, E) for x in xs]


# close returns ------------------------------------------------------------


def _parabola_vertex(d_prev, d_mid, d_next):
    denom = d_prev - 2 * d_mid + d_next
    if denom <= 0:
        return 0.0, d_mid
    s = 0.5 * (d_prev - d_next) / denom
    s = max(-1.0, min(1.0, s))
    val = d_mid - 0.25 * (d_prev - d_next) * s
    return s, val


def _close_return_one(f, x0, t_max, t_min, eps, dt, energy_fn):
    x0 = np.asarray(x0, dtype=float)
    if is_separable(f):
        traj = integrate_forest_ruth(f, x0, (0.0, t_max), dt)
    else:
        traj = integrate_rk4(f, x0, (0.0, t_max), dt)
    xs = np.ascontiguousarray(traj.x)
    k = kernels.close_return(xs, x0, 0.0, dt, t_min, eps)
    if k < 0:
        return None
    # a return needs a departure first; this rejects fixed points
    if float(np.linalg.norm(xs[:k] - x0, axis=1).max(initial=0.0)) < eps:
        return None
    d = np.linalg.norm(xs[max(k - 1, 0) : k + 2] - x0, axis=1)
    s = 0.0
    resid = float(np.linalg.norm(xs[k] - x0))
    if 0 < k < len(xs) - 1:
        s, _ = _parabola_vertex(d[0], d[1], d[2])
    T = float(traj.t[k] + s * dt)
    energy = float(energy_fn(x0)) if energy_fn is not None else float("nan")
    return Orbit(x0.copy(), T, resid, energy)


def close_return_scan(
    f: VectorField,
    ics,
    t_max: float = 33.0,
    t_min: float = 1.0,
    eps: float = 1e-3,
    dt: float = DT_TARGET,
    workers: int | None = None,
) -> list[Orbit]:
    """First close return |x(t) - x0| < eps with t >= t_min for each initial condition.

    Trajectories that never leave the eps-ball (fixed points) have no return.

    The return time is refined to the vertex of a parabola through the
    distances at the three samples around the discrete minimum.  Initial
    conditions without a close return are dropped; order follows ``ics``.
    """
    if not t_min < t_max:
        raise ValueError("t_min must be smaller than t_max")
    energy_fn = f.hamiltonian
    ics = [np.asarray(x, dtype=float) for x in ics]
    n = worker_count(workers)
    if n > 1 and len(ics) > 1:
        with ThreadPoolExecutor(n) as pool:
            found = list(pool.map(lambda x: _close_return_one(f, x, t_max, t_min, eps, dt, energy_fn), ics))
    else:
        found = [_close_return_one(f, x, t_max, t_min, eps, dt, energy_fn) for x in ics]
    return [o for o in found if o is not None]


# shooting -----------------------------------------------------------------


def even_dt(T: float, target: float = DT_TARGET) -> float:
    """Step close to ``target`` that divides T into a whole number of steps."""
    return T / max(1, round(T / target))


def shooting_refine(
    f: VectorField,
    candidate: Orbit,
    curve=None,
    tol: float = 1e-10,
    max_evals: int = 4000,
    dt_target: float = DT_TARGET,
) -> Orbit:
    """Nelder-Mead on (x1, T) minimizing |x(T) - x(0)|.

    ``curve`` maps x1 to a full initial state; by default it is the
    Henon-Heiles H = E section through the candidate's energy.
    """
    if not math.isfinite(candidate.residual):
        raise ValueError("candidate residual must be finite")
    if curve is None:
        E = candidate.energy if math.isfinite(candidate.energy) else HH_ENERGY
        curve = lambda x1: hh_initial_curve(x1, E)  # noqa: E731

    def state(z):
        x0 = curve(z[0])
        xT = _flow_end(f, x0, z[1], even_dt(z[1], dt_target))
        return x0, float(np.linalg.norm(xT - x0))

    best = {"z": np.array([candidate.x0[0], candidate.T]), "r": math.inf}

    def objective(z):
        if z[1] <= 0:
            return 1e3
        try:
            _, r = state(z)
        except (ValueError, FloatingPointError):
            return 1e3
        if r < best["r"]:
            best["z"], best["r"] = np.array(z, dtype=float), r
        return r

    def stop(intermediate_result):
        if best["r"] < tol:
            raise StopIteration

    z0 = np.array([candidate.x0[0], candidate.T])
    simplex = np.array([z0, z0 + [1e-3, 0.0], z0 + [0.0, 1e-3]])
    optimize.minimize(
        objective,
        z0,
        method="Nelder-Mead",
        callback=stop,
        options={
            "initial_simplex": simplex,
            "xatol": 1e-12,
            "fatol": math.inf,
            "maxfev": max_evals,
            "adaptive": False,
        },
    )
    # restart from the best vertex while progress continues
    for _ in range(3):
        if best["r"] < tol:
            break
        before = best["r"]
        zb = best["z"].copy()
        h = max(1e-7, min(1e-4, 10 * before))
        simplex = np.array([zb, zb + [h, 0.0], zb + [0.0, h]])
        optimize.minimize(
            objective, zb, method="Nelder-Mead", callback=stop,
            options={"initial_simplex": simplex, "xatol": 1e-14, "fatol": math.inf,
                     "maxfev": max_evals, "adaptive": False},
        )
        if best["r"] >= 0.5 * before:
            break
    zb = best["z"]
    x0 = curve(zb[0])
    energy = float(f.hamiltonian(x0)) if f.hamiltonian is not None else float("nan")
    orbit = Orbit(x0, float(zb[1]), float(best["r"]), energy)
    if not best["r"] < tol:
        raise ShootingError(f"closure residual {best['r']:.3e} above tolerance {tol:.1e}", orbit)
    return orbit


# Lyapunov exponents -------------------------------------------------------


def _base_with_midpoints(f: VectorField, x0, T: float, dt: float, n: int) -> np.ndarray:
    if is_separable(f):
        nq, (E, C, O) = _force_split(f)
        out = np.empty((2 * n + 1, f.n))
        kernels.fr_integrate_mid(E, C, O, nq, np.asarray(x0, dtype=float), dt, n, FR_C, FR_D, out)
        return out
    E, C, O = pack(f.components, f.n)
    out = np.empty((2 * n + 1, f.n))
    kernels.rk4_integrate(E, C, O, np.asarray(x0, dtype=float), 0.5 * dt, 2 * n, out, 1)
    return out


def _direction_gap(a, b) -> float:
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def leading_le(
    f: VectorField,
    orbit: Orbit,
    align_periods: int = 14,
    dt: float | None = None,
    seed: int = 0,
    y0=None,
) -> LeEstimate:
    """mu1 = log|y(T)| / T after aligning y with the dominant Floquet direction.

    y starts from a seeded random unit vector (or ``y0``), is advanced over
    one period and renormalized ``align_periods`` times; one further period
    gives mu1.  The base orbit is integrated once and reused every period.
    """
    if not orbit.residual < 1e-8:
        raise ValueError(f"orbit closure residual {orbit.residual:.2e} too large for a monodromy estimate")
    T = float(orbit.T)
    if dt is None:
        dt = even_dt(T)
    n = max(1, round(T / dt))
    dt = T / n
    xs = np.ascontiguousarray(_base_with_midpoints(f, orbit.x0, T, dt, n))
    J = jacobian(f)
    JE, JC, JO = pack([J[i][j] for i in range(f.n) for j in range(f.n)], f.n)
    if y0 is None:
        y = np.random.default_rng(seed).standard_normal(f.n)
    else:
        y = np.asarray(y0, dtype=float).copy()
    y /= np.linalg.norm(y)
    prev = y.copy()
    resid = math.inf
    for _ in range(align_periods):
        y = kernels.tangent_rk4(JE, JC, JO, xs, y, dt)
        y /= np.linalg.norm(y)
        resid = _direction_gap(y, prev)
        prev = y.copy()
    yT = kernels.tangent_rk4(JE, JC, JO, xs, y, dt)
    mu1 = math.log(float(np.linalg.norm(yT))) / T
    converged = resid <= 1e-10
    if not converged:
        log.warning("tangent direction not converged after %d periods (residual %.2e)", align_periods, resid)
    return LeEstimate(orbit, mu1, align_periods, resid, seed, converged)


# end-to-end orbit pipeline ------------------------------------------------


@dataclass
class OrbitReport:
    candidates: list
    estimates: list
    failures: list = field(default_factory=list)

    @property
    def periods(self) -> list[float]:
        return distinct_periods([e.orbit.T for e in self.estimates])


def distinct_periods(periods, tol: float = 1e-4) -> list[float]:
    out: list[float] = []
    for T in sorted(periods):
        if not out or T - out[-1] > tol:
            out.append(T)
    return out


def _refine_and_measure(f, cand, tol, seed, align_periods):
    try:
        orbit = shooting_refine(f, cand, tol=tol)
    except ShootingError as exc:
        return None, exc
    return leading_le(f, orbit, align_periods=align_periods, seed=seed), None


def hh_orbit_pipeline(
    n_ics: int = 121,
    t_max: float = 33.0,
    t_min: float = 1.0,
    eps: float = 1e-3,
    dt: float = DT_TARGET,
    tol: float = 1e-10,
    seed: int = 0,
    align_periods: int = 14,
    energy: float = HH_ENERGY,
    workers: int | None = None,
    f: VectorField | None = None,
) -> OrbitReport:
    """Grid on the H = E section -> close returns -> shooting -> leading LE."""
    if f is None:
        from .presets import henon_heiles

        f = henon_heiles()
    ics = hh_scan_ics(n_ics, energy)
    cands = close_return_scan(f, ics, t_max, t_min, eps, dt, workers)
    nw = worker_count(workers)
    job = lambda c: _refine_and_measure(f, c, tol, seed, align_periods)  # noqa: E731
    if nw > 1 and len(cands) > 1:
        with ThreadPoolExecutor(nw) as pool:
            results = list(pool.map(job, cands))
    else:
        results = [job(c) for c in cands]
    ests = [r for r, _ in results if r is not None]
    fails = [e for _, e in results if e is not None]
    return OrbitReport(cands, ests, fails)


# CSV ----------------------------------------------------------------------


def orbit_csv_header(n: int) -> list[str]:
    return [f"x0_{i + 1}" for i in range(n)] + ["T", "residual", "energy", "mu1", "seed"]


def _num(v: float) -> str:
    return "%.17g" % v


def orbit_csv_row(est: LeEstimate) -> list[str]:
    o = est.orbit
    return [_num(v) for v in o.x0] + [_num(o.T), _num(o.residual), _num(o.energy), _num(est.mu1), str(est.seed)]


def orbits_to_csv(estimates, n: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(orbit_csv_header(n))
    for e in estimates:
        w.writerow(orbit_csv_row(e))
    return buf.getvalue()


def read_orbits_csv(text: str) -> list[LeEstimate]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    n = len(rows[0]) - 5
    out = []
    for r in rows[1:]:
        vals = [float(v) for v in r[: n + 4]]
        orbit = Orbit(np.array(vals[:n]), vals[n], vals[n + 1], vals[n + 2])
        out.append(LeEstimate(orbit, vals[n + 3], 0, float("nan"), int(r[n + 4])))
    return out
