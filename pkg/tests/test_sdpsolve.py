import numpy as np
import pytest

from lyapcert import kernels
from lyapcert.sdpsolve import BlockEntries, BlockSdp, SdpStructureError, _schur_weights, polish, solve
from lyapcert.soscompile import Degrees, gramize, assemble_program
from lyapcert.dynamics import build_tangent
from lyapcert.presets import lorenz
from lyapcert.symmetry import group_closure


def two_by_two(row_scale=1.0):
    """minimize y  s.t.  [[y, 1], [1, y]] >= 0."""
    blk = BlockEntries.from_triplets([0, 1, 2], [0, 1, 0], [0, 1, 1], [1.0, 1.0, 0.5])
    F = np.array([[-1.0], [-1.0], [0.0]])
    b = np.array([0.0, 0.0, 1.0])
    s = np.asarray(row_scale, dtype=float) * np.ones(3)
    return BlockSdp([2], [blk.scaled(s)], F * s[:, None], b * s, np.array([1.0]))


def one_by_one():
    """minimize y  s.t.  y >= 0 as a 1x1 block."""
    blk = BlockEntries.from_triplets([0], [0], [0], [1.0])
    return BlockSdp([1], [blk], np.array([[-1.0]]), np.array([0.0]), np.array([1.0]))


def lorenz_sdp(d=2):
    ts = build_tangent(lorenz())
    G = group_closure([(-1, -1, 1)])
    return gramize(assemble_program(ts, None, Degrees(2, (), (d,)), G), prune=True).sdp


class TestOracles:
    def test_two_by_two(self):
        sol = solve(two_by_two())
        assert sol.optimal
        assert sol.primal_objective == pytest.approx(1.0, abs=1e-7)
        assert sol.dual_objective == pytest.approx(1.0, abs=1e-7)

    def test_one_by_one(self):
        sol = solve(one_by_one())
        assert sol.optimal
        assert sol.primal_objective == pytest.approx(0.0, abs=1e-7)

    def test_optimal_status_certifies_tolerances(self):
        sol = solve(lorenz_sdp())
        assert sol.optimal
        assert sol.gap <= 1e-8 and sol.primal_infeasibility <= 1e-8 and sol.dual_infeasibility <= 1e-8
        assert min(sol.min_eigenvalues()) >= -1e-8

    def test_dual_slack_matches_adjoint(self):
        p = two_by_two()
        sol = solve(p)
        Z = p.adjoint(-sol.y)
        assert np.allclose(Z[0], sol.Z[0], atol=1e-7)
        assert np.allclose(p.F.T @ sol.y, p.c, atol=1e-7)


class TestStructure:
    def test_row_out_of_range(self):
        blk = BlockEntries.from_triplets([3], [0], [0], [1.0])
        with pytest.raises(SdpStructureError):
            BlockSdp([1], [blk], np.zeros((1, 0)), np.zeros(1), np.zeros(0))

    def test_entry_outside_block(self):
        blk = BlockEntries.from_triplets([0], [0], [2], [1.0])
        with pytest.raises(SdpStructureError):
            BlockSdp([2], [blk], np.zeros((1, 0)), np.zeros(1), np.zeros(0))

    def test_objective_length(self):
        blk = BlockEntries.from_triplets([0], [0], [0], [1.0])
        with pytest.raises(SdpStructureError):
            BlockSdp([1], [blk], np.zeros((1, 1)), np.zeros(1), np.zeros(2))

    def test_block_count(self):
        with pytest.raises(SdpStructureError):
            BlockSdp([1, 2], [], np.zeros((1, 0)), np.zeros(1), np.zeros(0))

    def test_duplicate_triplets_merge(self):
        blk = BlockEntries.from_triplets([0, 0, 0], [1, 0, 0], [0, 1, 0], [0.25, 0.25, 0.0])
        assert list(blk.p) == [0] and list(blk.q) == [1] and list(blk.val) == [0.5]

    def test_adjoint_is_transpose_of_apply(self, rng):
        p = lorenz_sdp()
        X = []
        for d in p.block_dims:
            C = rng.standard_normal((d, d))
            X.append(C + C.T)
        y = rng.standard_normal(p.m)
        lhs = float(y @ p.apply(X))
        rhs = sum(float(np.sum(A * Xk)) for A, Xk in zip(p.adjoint(y), X))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestStatuses:
    def test_infeasible(self):
        # X00 = -1 with X >= 0
        blk = BlockEntries.from_triplets([0], [0], [0], [1.0])
        p = BlockSdp([1], [blk], np.zeros((1, 0)), np.array([-1.0]), np.zeros(0))
        sol = solve(p)
        assert not sol.optimal
        assert sol.status in ("infeasible_detected", "numerical_failure", "max_iter")

    def test_unbounded_dual_reported_infeasible(self):
        # minimize u s.t. X00 - u = 0, X >= 0 has y* = 0; flip the sign of c to make the primal unbounded
        p = one_by_one()
        p = BlockSdp(p.block_dims, p.blocks, p.F, p.b, -p.c)
        sol = solve(p, max_iter=60)
        assert not sol.optimal

    def test_max_iter(self):
        sol = solve(lorenz_sdp(), max_iter=2)
        assert sol.status == "max_iter"
        assert sol.iterations == 2

    def test_non_optimal_never_claims_optimality(self):
        sol = solve(lorenz_sdp(), max_iter=3)
        assert not sol.optimal


class TestProperties:
    @pytest.mark.parametrize("make", [two_by_two, one_by_one, lorenz_sdp])
    def test_weak_duality_on_final_iterate(self, make):
        sol = solve(make())
        assert sol.primal_objective >= sol.dual_objective - 1e-9 * (1 + abs(sol.primal_objective))

    def test_weak_duality_on_feasible_iterates(self):
        """Checked wherever the iterate is feasible to 1e-9; infeasible iterates carry no ordering."""
        sol = solve(lorenz_sdp())
        checked = 0
        for e in sol.log:
            if e["pinf"] <= 1e-9 and e["dinf"] <= 1e-9:
                checked += 1
                assert e["pobj"] >= e["dobj"] - 1e-9 * (1 + abs(e["pobj"]))
        assert checked >= 1

    @pytest.mark.parametrize("make", [two_by_two, lorenz_sdp])
    def test_row_scaling_invariance(self, make):
        p = make()
        s = 10.0 * np.ones(p.m)
        q = BlockSdp(p.block_dims, [blk.scaled(s) for blk in p.blocks], p.F * 10.0, p.b * 10.0, p.c)
        a, b = solve(p), solve(q)
        assert a.optimal and b.optimal
        assert abs(a.primal_objective - b.primal_objective) <= 1e-8 * (1 + abs(a.primal_objective))

    def test_deterministic_logs(self):
        a, b = solve(lorenz_sdp(4)), solve(lorenz_sdp(4))
        assert a.log == b.log
        assert all(np.array_equal(x, y) for x, y in zip(a.X, b.X))

    def test_min_eigenvalue(self):
        sol = solve(lorenz_sdp(4))
        assert min(sol.min_eigenvalues()) >= -1e-8


def test_polish_does_not_increase_residual():
    p = lorenz_sdp(4)
    sol = solve(p, max_iter=12)
    before = np.abs(p.b - p.apply(sol.X) - p.F @ sol.u).max()
    after_sol = polish(p, sol)
    after = np.abs(p.b - p.apply(after_sol.X) - p.F @ after_sol.u).max()
    assert after <= before
    assert after_sol.u[0] == sol.u[0]


def test_backend_schur_kernels_agree(rng):
    from lyapcert import _fallback

    p = lorenz_sdp(4)
    for blk, d in zip(p.blocks, p.block_dims):
        C = rng.standard_normal((d, d))
        W = np.ascontiguousarray(C @ C.T)
        wts = _schur_weights(blk)
        M1 = np.zeros((p.m, p.m))
        M2 = np.zeros((p.m, p.m))
        kernels.schur_accumulate(blk.rows, blk.p, blk.q, wts, W, M1)
        _fallback.schur_accumulate(blk.rows, blk.p, blk.q, wts, W, M2)
        assert np.allclose(M1, M2, rtol=1e-12, atol=1e-12)


def test_pure_python_backend_selected_by_env():
    import os
    import subprocess
    import sys

    code = (
        "from lyapcert import kernels; from lyapcert.cli import main; "
        "print(kernels.BACKEND); main(['bound', '--preset', 'lorenz', '--degrees', '2'])"
    )
    env = dict(os.environ, LYAPCERT_PURE_PYTHON="1")
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    lines = proc.stdout.splitlines()
    assert lines[0] == "python"
    assert float(lines[2].split(",")[1]) == pytest.approx(14.02562, abs=5e-4)
