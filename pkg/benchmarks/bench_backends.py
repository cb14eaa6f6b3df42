"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_backends.py [--repeat N]

Times Schur-complement assembly on the Henon-Heiles d=4 SDP and a
Forest-Ruth integration of one Henon-Heiles period, and checks that both
backends agree.
"""

import argparse
import timeit

import numpy as np

from lyapcert import _fallback, presets
from lyapcert.cli import ProblemFile
from lyapcert.sdpsolve import _schur_weights
from lyapcert.soscompile import gramize
from lyapcert.trajectory import FR_C, FR_D, _force_split, even_dt, hh_initial_curve

try:
    from lyapcert import _kernels
except ImportError:  # extension not built
    _kernels = None


def schur_case():
    pf = ProblemFile.from_dict(presets.preset_problem("henon-heiles"))
    sdp = gramize(pf.program(4), prune=True).sdp
    rng = np.random.default_rng(0)
    Ws = []
    for d in sdp.block_dims:
        C = rng.standard_normal((d, d))
        Ws.append(np.ascontiguousarray(C @ C.T))
    weights = [_schur_weights(b) for b in sdp.blocks]

    def run(mod):
        M = np.zeros((sdp.m, sdp.m))
        for blk, w, W in zip(sdp.blocks, weights, Ws):
            mod.schur_accumulate(blk.rows, blk.p, blk.q, w, W, M)
        return M

    return f"schur_accumulate (m={sdp.m}, {len(sdp.block_dims)} blocks)", run


def forest_ruth_case():
    nq, (E, C, O) = _force_split(presets.henon_heiles())
    x0 = hh_initial_curve(0.562878385826716)
    T = 6.966517640959103
    dt = even_dt(T)
    n = round(T / dt)

    def run(mod):
        out = np.empty((n // 100 + 1, 4))
        return np.asarray(mod.fr_integrate(E, C, O, nq, x0, dt, n, FR_C, FR_D, out, 100))

    return f"fr_integrate ({n} steps)", run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    print(f"{'kernel':<40}{'backend':>8}{'best s':>12}{'speedup':>9}")
    for name, run in (schur_case(), forest_ruth_case()):
        ref = run(_fallback)
        base = None
        for label, mod in backends:
            got = run(mod)
            assert np.allclose(got, ref, rtol=1e-11, atol=1e-11), f"{label} disagrees on {name}"
            best = min(timeit.repeat(lambda: run(mod), number=1, repeat=args.repeat))
            base = base or best
            print(f"{name:<40}{label:>8}{best:>12.4f}{base / best:>9.1f}x")
    if _kernels is None:
        print("compiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
