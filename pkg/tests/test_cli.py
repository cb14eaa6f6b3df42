import csv
import io
import json
import shutil
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lyapcert import presets
from lyapcert.cli import BOUND_COLUMNS, ProblemError, ProblemFile, main, parse_problem, serialize_problem
from lyapcert.sdpa import write_solution
from lyapcert.sdpsolve import solve
from lyapcert.soscompile import gramize


@pytest.fixture(autouse=True)
def private_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("LYAPCERT_CACHE", str(tmp_path / "cache"))
    monkeypatch.setenv("LYAPCERT_THREADS", "2")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestProblemFile:
    @pytest.mark.parametrize("name", ["lorenz", "henon-heiles"])
    def test_preset_round_trip(self, name):
        pf = ProblemFile.from_dict(presets.preset_problem(name))
        again = parse_problem(serialize_problem(pf))
        assert again == pf
        assert serialize_problem(again) == serialize_problem(pf)

    @given(
        st.lists(st.sampled_from([2, 4, 6]), max_size=3),
        st.sampled_from(["fill", "uniform"]),
        st.one_of(st.none(), st.floats(1.0, 1e4, allow_nan=False)),
    )
    def test_round_trip_property(self, degs, rule, radius):
        d = presets.preset_problem("lorenz")
        d["degrees"] = degs
        d["options"] = {**d["options"], "degree_rule": rule}
        if radius is not None:
            d["options"]["ball_radius"] = radius
        pf = ProblemFile.from_dict(d)
        assert parse_problem(serialize_problem(pf)) == pf

    def test_lorenz_parameters(self):
        f = ProblemFile.from_dict(presets.preset_problem("lorenz")).vector_field()
        assert f.components[0]([1.0, 0.0, 0.0]) == -10.0
        assert f.components[1]([1.0, 0.0, 0.0]) == 28.0
        assert f.components[2]([0.0, 0.0, 1.0]) == pytest.approx(-8.0 / 3.0, abs=1e-15)

    def test_undeclared_variable(self):
        d = presets.preset_problem("lorenz")
        d["field"] = ["y1", "x1", "x3"]
        with pytest.raises(ProblemError):
            ProblemFile.from_dict(d)

    def test_unknown_key(self):
        d = presets.preset_problem("lorenz")
        d["colour"] = "red"
        with pytest.raises(ProblemError):
            ProblemFile.from_dict(d)

    def test_problem_file_command(self, tmp_path, capsys):
        path = tmp_path / "lorenz.json"
        path.write_text(serialize_problem(ProblemFile.from_dict(presets.preset_problem("lorenz"))))
        code, out, _ = run(capsys, "bound", "--problem", str(path), "--degrees", "2")
        assert code == 0
        assert float(table(out)[0]["bound"]) == pytest.approx(14.02562, abs=5e-4)


class TestBound:
    def test_lorenz_two_and_four(self, capsys):
        code, out, _ = run(capsys, "bound", "--preset", "lorenz", "--degrees", "2,4")
        assert code == 0
        assert out.splitlines()[0] == ",".join(BOUND_COLUMNS)
        assert BOUND_COLUMNS == ["degree", "bound", "status", "gap", "residual", "min_eig", "wall_time_s"]
        rows = table(out)
        assert [r["degree"] for r in rows] == ["2", "4"]
        assert float(rows[0]["bound"]) == pytest.approx(14.02562, abs=5e-4)
        assert float(rows[1]["bound"]) == pytest.approx(11.82772, abs=1e-4)

    def test_henon_heiles_two(self, capsys):
        code, out, _ = run(capsys, "bound", "--preset", "henon-heiles", "--degrees", "2")
        assert code == 0
        assert float(table(out)[0]["bound"]) == pytest.approx(0.86999, abs=1e-3)

    @pytest.mark.parametrize("degrees", ["", ",", "two"])
    def test_bad_degrees(self, capsys, degrees):
        with pytest.raises(SystemExit) as info:
            main(["bound", "--preset", "lorenz", "--degrees", degrees])
        assert info.value.code == 2
        assert "usage:" in capsys.readouterr().err

    def test_uncertified_row_is_nonzero_exit(self, capsys, monkeypatch):
        import dataclasses

        import lyapcert.soscompile as sc

        real = sc.verify_certificate
        monkeypatch.setattr(
            sc, "verify_certificate", lambda *a, **k: dataclasses.replace(real(*a, **k), passed=False)
        )
        code, out, _ = run(capsys, "bound", "--preset", "lorenz", "--degrees", "2")
        row = table(out)[0]
        assert code == 1
        assert row["bound"] == "" and row["status"].startswith("uncertified:")

    def test_deterministic_bytes(self, capsys):
        outs = []
        for _ in range(2):
            _, out, _ = run(capsys, "bound", "--preset", "lorenz", "--degrees", "2,4", "--seed", "3")
            outs.append([r[:-1] for r in csv.reader(io.StringIO(out))])
        assert outs[0] == outs[1]

    def test_pretty_and_out(self, tmp_path, capsys):
        dest = tmp_path / "b.csv"
        code, out, _ = run(capsys, "bound", "--preset", "lorenz", "--degrees", "2", "--pretty", "--out", str(dest))
        assert code == 0
        assert "," not in out.splitlines()[0]
        assert dest.read_text().startswith("degree,bound,status")


class TestExportImport:
    def test_export_header_and_sidecar(self, tmp_path, capsys):
        dest = tmp_path / "l2.dat-s"
        code, _, _ = run(capsys, "export", "--preset", "lorenz", "--degrees", "2", "--out", str(dest))
        assert code == 0
        meta = json.loads((tmp_path / "l2.dat-s.meta.json").read_text())
        pf = ProblemFile.from_dict(meta["problem"])
        problem = gramize(pf.program(2), prune=meta["prune"])
        lines = [l for l in dest.read_text().splitlines() if l[0] not in '"*']
        assert int(lines[0]) == problem.sdp.m == meta["m"]
        assert [int(v) for v in lines[2].split()][:-1] == problem.block_sizes

    def test_export_needs_single_degree(self, tmp_path, capsys):
        with pytest.raises(SystemExit):
            main(["export", "--preset", "lorenz", "--degrees", "2,4", "--out", str(tmp_path / "x")])

    def test_henon_heiles_d8_exports_without_solving(self, tmp_path, capsys):
        dest = tmp_path / "hh8.dat-s"
        code, out, _ = run(capsys, "export", "--preset", "henon-heiles", "--degrees", "8", "--out", str(dest))
        assert code == 0 and dest.stat().st_size > 0

    def test_import_own_solution(self, tmp_path, capsys):
        dest = tmp_path / "l4.dat-s"
        run(capsys, "export", "--preset", "lorenz", "--degrees", "4", "--out", str(dest))
        meta = json.loads((tmp_path / "l4.dat-s.meta.json").read_text())
        problem = gramize(ProblemFile.from_dict(meta["problem"]).program(4), prune=meta["prune"])
        sol = solve(problem.sdp)
        write_solution(sol, problem.sdp, tmp_path / "l4.sol")
        code, out, _ = run(capsys, "import-solution", str(tmp_path / "l4.sol"), "--sdpa", str(dest))
        assert code == 0
        row = table(out)[0]
        assert row["status"] == "optimal"
        assert float(row["bound"]) == pytest.approx(sol.primal_objective, abs=1e-9)
        _, bnd, _ = run(capsys, "bound", "--preset", "lorenz", "--degrees", "4")
        assert float(row["bound"]) == pytest.approx(float(table(bnd)[0]["bound"]), abs=1e-9)

    def test_import_hash_mismatch(self, tmp_path, capsys):
        dest = tmp_path / "l2.dat-s"
        run(capsys, "export", "--preset", "lorenz", "--degrees", "2", "--out", str(dest))
        shutil.copy(tmp_path / "l2.dat-s.meta.json", tmp_path / "other.dat-s.meta.json")
        (tmp_path / "other.dat-s").write_text(dest.read_text() + "* edited\n")
        (tmp_path / "x.sol").write_text("0\n")
        assert main(["import-solution", str(tmp_path / "x.sol"), "--sdpa", str(tmp_path / "other.dat-s")]) == 2

    def test_import_wrong_structure(self, tmp_path, capsys):
        run(capsys, "export", "--preset", "lorenz", "--degrees", "2", "--out", str(tmp_path / "a.dat-s"))
        (tmp_path / "bad.sol").write_text("1 2 3\n2 1 1 1 1.0\n")
        assert main(["import-solution", str(tmp_path / "bad.sol"), "--sdpa", str(tmp_path / "a.dat-s")]) == 2

    def test_import_needs_source(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["import-solution", str(tmp_path / "x.sol")])


class TestVerifyOrbits:
    def test_lorenz_fixed_point(self, capsys):
        code, out, err = run(capsys, "verify-orbits", "--preset", "lorenz")
        assert code == 0
        row = table(out)[0]
        assert float(row["mu1"]) == pytest.approx(11.82772, abs=1e-5)
        assert float(row["mu2"]) == pytest.approx(-8.0 / 3.0, abs=1e-9)
        assert "no cached certified bound" in err

    def test_summary_uses_cached_bound(self, capsys):
        run(capsys, "bound", "--preset", "lorenz", "--degrees", "4")
        code, _, err = run(capsys, "verify-orbits", "--preset", "lorenz")
        assert code == 0 and "best certified bound 11.8277" in err

    def test_zero_eps(self, capsys, caplog):
        code, out, _ = run(capsys, "verify-orbits", "--preset", "henon-heiles", "--eps", "0")
        assert code == 1
        assert out.strip() == "x0_1,x0_2,x0_3,x0_4,T,residual,energy,mu1,seed"
        assert any(r.levelname == "WARNING" and "eps" in r.message for r in caplog.records)

    def test_small_scan_is_deterministic(self, capsys):
        args = ["verify-orbits", "--preset", "henon-heiles", "--n-ics", "9", "--t-max", "10", "--eps", "3e-2", "--seed", "5"]
        a = run(capsys, *args)
        b = run(capsys, *args)
        assert a[1] == b[1]
        for row in table(a[1]):
            assert float(row["residual"]) < 1e-10 and row["seed"] == "5"


class TestCheckSymmetry:
    @pytest.mark.parametrize("name", ["lorenz", "henon-heiles"])
    def test_presets(self, name, capsys):
        code, out, _ = run(capsys, "check-symmetry", "--preset", name)
        assert code == 0
        assert "|G| = 2, |G'| = 4" in out
        assert "NOT" not in out

    def test_broken_symmetry(self, tmp_path, capsys):
        d = presets.preset_problem("lorenz")
        d["symmetry"] = [["-x1", "x2", "x3"]]
        path = tmp_path / "p.json"
        path.write_text(json.dumps(d))
        code, out, _ = run(capsys, "check-symmetry", "--problem", str(path))
        assert code == 1 and "NOT equivariant" in out


def test_console_script():
    exe = shutil.which("lyapcert")
    cmd = [exe] if exe else [sys.executable, "-m", "lyapcert.cli"]
    proc = subprocess.run(cmd + ["check-symmetry", "--preset", "lorenz"], capture_output=True, text=True)
    assert proc.returncode == 0 and "|G'| = 4" in proc.stdout
