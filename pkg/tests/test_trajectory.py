import logging
import math

import numpy as np
import pytest

from lyapcert import _fallback, kernels
from lyapcert.dynamics import VectorField, fixed_point_les
from lyapcert.polyalg import Polynomial
from lyapcert.presets import henon_heiles, lorenz
from lyapcert.trajectory import (
    FR_C,
    FR_D,
    HH_ENERGY,
    Orbit,
    ShootingError,
    close_return_scan,
    distinct_periods,
    even_dt,
    hh_initial_curve,
    hh_scan_ics,
    integrate_forest_ruth,
    integrate_rk4,
    is_separable,
    leading_le,
    orbits_to_csv,
    pack,
    read_orbits_csv,
    shooting_refine,
)

T_SHORT = 6.966517640959103
X_SHORT = (0.562878385826716, -0.053847890920149)


def decay(n=1):
    return VectorField(tuple(-Polynomial.variable(i, n) for i in range(n)))


def oscillator():
    q, p = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
    return VectorField((p, -q), hamiltonian=(q * q + p * p) * 0.5)


@pytest.fixture(scope="module")
def short_orbit():
    seed = Orbit(hh_initial_curve(0.563), 6.97, 1e-3, HH_ENERGY)
    return shooting_refine(henon_heiles(), seed)


class TestRk4:
    def test_exponential_decay(self):
        tr = integrate_rk4(decay(), [1.0], (0.0, 1.0), 1e-3)
        assert tr.t[-1] == 1.0
        assert abs(tr.x[-1, 0] - math.exp(-1)) <= 1e-9

    def test_fourth_order_convergence(self):
        errs = [abs(integrate_rk4(decay(), [1.0], (0.0, 1.0), h).x[-1, 0] - math.exp(-1)) for h in (0.1, 0.05)]
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)

    def test_zero_field(self):
        f = VectorField((Polynomial.zero(2), Polynomial.zero(2)))
        tr = integrate_rk4(f, [0.3, -2.0], (0.0, 2.0), 0.1)
        assert np.all(tr.x == np.array([0.3, -2.0]))

    def test_last_step_lands_on_end(self):
        tr = integrate_rk4(decay(), [1.0], (0.0, 1.05), 0.1)
        assert tr.t[-1] == pytest.approx(1.05, abs=1e-15)
        assert tr.x[-1, 0] == pytest.approx(math.exp(-1.05), abs=1e-6)

    def test_time_dependent_linear(self):
        # x' = t x, x(0) = 1 -> exp(t^2 / 2)
        tr = integrate_rk4(lambda t: np.array([[t]]), [1.0], (0.0, 1.0), 1e-3)
        assert tr.x[-1, 0] == pytest.approx(math.exp(0.5), abs=1e-10)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_state(self):
        with pytest.raises(FloatingPointError):
            integrate_rk4(lambda t: np.array([[1e308]]), [1e10], (0.0, 1.0), 0.5)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            integrate_rk4(decay(), [1.0], (0.0, 1.0), 0.0)


class TestForestRuth:
    def test_coefficients(self):
        th = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
        assert np.allclose(FR_C, [th / 2, (1 - th) / 2, (1 - th) / 2, th / 2], rtol=0, atol=1e-15)
        assert np.allclose(FR_D, [th, 1 - 2 * th, th, 0.0], rtol=0, atol=1e-15)
        assert FR_C.sum() == pytest.approx(1.0) and FR_D.sum() == pytest.approx(1.0)

    def test_oscillator_energy_100_periods(self):
        f = oscillator()
        T = 100 * 2 * math.pi
        tr = integrate_forest_ruth(f, [1.0, 0.0], (0.0, T), 1e-3, stride=50)
        H = f.hamiltonian.eval_many(tr.x)
        assert np.abs(H - 0.5).max() <= 1e-10

    def test_oscillator_fourth_order(self):
        f = oscillator()
        errs = []
        for h in (0.1, 0.05):
            x = integrate_forest_ruth(f, [1.0, 0.0], (0.0, 1.0), h).x[-1]
            errs.append(np.linalg.norm(x - [math.cos(1.0), -math.sin(1.0)]))
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)

    def test_zero_state_fixed(self):
        tr = integrate_forest_ruth(henon_heiles(), np.zeros(4), (0.0, 5.0), 1e-2)
        assert np.all(tr.x == 0.0)

    def test_non_separable_rejected(self):
        assert not is_separable(lorenz())
        with pytest.raises(ValueError):
            integrate_forest_ruth(lorenz(), [1.0, 1.0, 1.0], (0.0, 1.0), 1e-3)
        x = [Polynomial.variable(i, 2) for i in range(2)]
        with pytest.raises(ValueError):
            integrate_forest_ruth(VectorField((x[1], -x[1])), [1.0, 0.0], (0.0, 1.0), 1e-3)

    def test_henon_heiles_drift_one_period(self):
        f = henon_heiles()
        x0 = np.array([*X_SHORT, 0.0, 0.0])
        tr = integrate_forest_ruth(f, x0, (0.0, T_SHORT), even_dt(T_SHORT))
        H = f.hamiltonian.eval_many(tr.x)
        assert np.abs(H - H[0]).max() <= 1e-9

    def test_henon_heiles_drift_per_ten_time_units(self):
        f = henon_heiles()
        x0 = hh_initial_curve(-0.2)
        tr = integrate_forest_ruth(f, x0, (0.0, 30.0), 1e-3, stride=10)
        H = f.hamiltonian.eval_many(tr.x)
        assert np.abs(H - H[0]).max() <= 1e-8


class TestInitialCurve:
    def test_zero_energy(self):
        assert np.array_equal(hh_initial_curve(0.0, 0.0), np.zeros(4))

    def test_reference_point(self):
        x = hh_initial_curve(X_SHORT[0])
        assert x[1] == pytest.approx(X_SHORT[1], abs=1e-14)
        assert np.all(x[2:] == 0.0)

    @pytest.mark.parametrize("x1", np.linspace(-0.6, 0.6, 13))
    def test_energy_residual(self, x1):
        x = hh_initial_curve(x1)
        assert abs(henon_heiles().hamiltonian(x) - HH_ENERGY) <= 1e-12
        assert x[0] ** 2 + x[1] ** 2 < 1.0

    def test_no_root(self):
        with pytest.raises(ValueError):
            hh_initial_curve(5.0)

    def test_scan_ics(self):
        ics = hh_scan_ics(121)
        assert len(ics) == 121
        xs = [x[0] for x in ics]
        assert xs == sorted(xs)


class TestCloseReturns:
    def test_oscillator_period(self):
        found = close_return_scan(oscillator(), [np.array([1.0, 0.0])], t_max=10.0, eps=1e-3, dt=1e-3, workers=1)
        assert len(found) == 1
        assert abs(found[0].T - 2 * math.pi) <= 1e-3

    def test_fixed_point_rejected_by_t_min(self):
        assert close_return_scan(henon_heiles(), [np.zeros(4)], t_max=5.0, t_min=1.0, workers=1) == []

    def test_no_return_is_omitted(self):
        assert close_return_scan(decay(2), [np.array([1.0, 1.0])], t_max=5.0, workers=1) == []

    def test_bad_window(self):
        with pytest.raises(ValueError):
            close_return_scan(oscillator(), [np.array([1.0, 0.0])], t_max=1.0, t_min=2.0)

    def test_worker_order_preserved(self):
        ics = [np.array([r, 0.0]) for r in (1.0, 2.0, 0.5)]
        a = close_return_scan(oscillator(), ics, t_max=10.0, workers=1)
        b = close_return_scan(oscillator(), ics, t_max=10.0, workers=3)
        assert [o.x0[0] for o in a] == [o.x0[0] for o in b] == [1.0, 2.0, 0.5]
        assert [o.T for o in a] == [o.T for o in b]

    def test_distinct_periods(self):
        assert distinct_periods([8.07, 6.97, 8.07000001, 23.0]) == [6.97, 8.07, 23.0]


class TestShooting:
    def test_shortest_orbit(self, short_orbit):
        assert abs(short_orbit.T - T_SHORT) <= 1e-9
        assert short_orbit.residual < 1e-10
        assert short_orbit.x0[0] == pytest.approx(X_SHORT[0], abs=1e-8)
        assert abs(short_orbit.energy - HH_ENERGY) <= 1e-12

    def test_exact_orbit_unchanged(self):
        f = oscillator()
        x0 = np.array([1.0, 0.0])
        curve = lambda a: np.array([a, 0.0])  # noqa: E731
        o = shooting_refine(f, Orbit(x0, 2 * math.pi, 0.0), curve=curve, tol=1e-9)
        assert abs(o.T - 2 * math.pi) <= 1e-6 and o.residual < 1e-9

    def test_stagnation_carries_best(self):
        f = henon_heiles()
        with pytest.raises(ShootingError) as info:
            shooting_refine(f, Orbit(hh_initial_curve(0.1), 3.0, 1.0, HH_ENERGY), tol=1e-14, max_evals=30)
        assert math.isfinite(info.value.best.residual)

    def test_infinite_residual_rejected(self):
        with pytest.raises(ValueError):
            shooting_refine(henon_heiles(), Orbit(hh_initial_curve(0.1), 3.0, math.inf))


class TestLeadingLe:
    def test_shortest_orbit(self, short_orbit):
        est = leading_le(henon_heiles(), short_orbit, seed=0)
        assert est.mu1 == pytest.approx(0.23081, abs=2e-4)
        assert est.iterations == 14 and math.isfinite(est.direction_residual)

    def test_random_directions_agree(self, short_orbit, caplog):
        with caplog.at_level(logging.ERROR):
            mus = [leading_le(henon_heiles(), short_orbit, seed=s).mu1 for s in range(10)]
        assert max(mus) - min(mus) <= 1e-8

    def test_rotated_orbits_agree(self, short_orbit):
        f = henon_heiles()
        base = leading_le(f, short_orbit).mu1
        for ang in (2 * math.pi / 3, -2 * math.pi / 3):
            c, s = math.cos(ang), math.sin(ang)
            R = np.array([[c, -s], [s, c]])
            x0 = np.concatenate([R @ short_orbit.x0[:2], R @ short_orbit.x0[2:]])
            xT = integrate_forest_ruth(f, x0, (0.0, short_orbit.T), even_dt(short_orbit.T), stride=10**9).x[-1]
            rot = Orbit(x0, short_orbit.T, float(np.linalg.norm(xT - x0)), short_orbit.energy)
            assert abs(leading_le(f, rot).mu1 - base) <= 1e-9

    def test_stable_focus(self):
        for T in (0.5, 1.0, 3.7):
            est = leading_le(decay(2), Orbit(np.zeros(2), T, 0.0), dt=1e-3)
            assert est.mu1 == pytest.approx(-1.0, abs=1e-6)

    def test_lorenz_origin(self):
        est = leading_le(lorenz(), Orbit(np.zeros(3), 1.0, 0.0))
        assert est.mu1 == pytest.approx(fixed_point_les(lorenz(), [0, 0, 0])[0], abs=1e-5)
        assert est.converged

    def test_large_residual_rejected(self):
        with pytest.raises(ValueError):
            leading_le(henon_heiles(), Orbit(hh_initial_curve(0.3), 5.0, 1e-3))

    def test_unconverged_direction_warns(self, caplog):
        # a pure rotation turns y by one radian per period, so the direction never settles
        q, p = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
        with caplog.at_level(logging.WARNING):
            est = leading_le(VectorField((p, -q)), Orbit(np.zeros(2), 1.0, 0.0), align_periods=3)
        assert not est.converged and est.direction_residual > 1e-10
        assert "not converged" in caplog.text
        assert math.isfinite(est.mu1)


def test_csv_round_trip_and_determinism(short_orbit):
    f = henon_heiles()
    ests = [leading_le(f, short_orbit, seed=7)]
    a = orbits_to_csv(ests, 4)
    b = orbits_to_csv([leading_le(f, short_orbit, seed=7)], 4)
    assert a == b
    assert a.splitlines()[0] == "x0_1,x0_2,x0_3,x0_4,T,residual,energy,mu1,seed"
    back = read_orbits_csv(a)
    assert back[0].mu1 == ests[0].mu1 and back[0].orbit.T == short_orbit.T and back[0].seed == 7


class TestBackends:
    def test_forest_ruth_kernels_agree(self):
        f = henon_heiles()
        from lyapcert.trajectory import _force_split

        nq, (E, C, O) = _force_split(f)
        x0 = np.array([*X_SHORT, 0.0, 0.0])
        a, b = np.empty((101, 4)), np.empty((101, 4))
        kernels.fr_integrate(E, C, O, nq, x0, 1e-3, 1000, FR_C, FR_D, a, 10)
        _fallback.fr_integrate(E, C, O, nq, x0, 1e-3, 1000, FR_C, FR_D, b, 10)
        assert np.allclose(a, b, rtol=0, atol=1e-13)

    def test_rk4_kernels_agree(self):
        f = lorenz()
        E, C, O = pack(f.components, 3)
        x0 = np.array([1.0, 1.0, 1.0])
        a, b = np.empty((51, 3)), np.empty((51, 3))
        kernels.rk4_integrate(E, C, O, x0, 1e-3, 500, a, 10)
        _fallback.rk4_integrate(E, C, O, x0, 1e-3, 500, b, 10)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
