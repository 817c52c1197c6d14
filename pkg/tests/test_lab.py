import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ch6relax import Domain
from ch6relax.galerkin import GalerkinSystem
from ch6relax.integrators import StepConfig, Trajectory, init_state, run
from ch6relax.lab import (ErrorReport, ManufacturedSolution, StabilityMonitor, SweepSpec,
                          damped_linear_solution, error_report, linear_mode_oracle, mean_ode_oracle,
                          mms_forcing, mode_stiffness, mu_time_integral_monitor, rate_fit, run_sweep,
                          same_scheme_mean, stability_report, tau_step)
from ch6relax.potential import classical, linear

from conftest import TWO_PI

EPS = 0.1


@pytest.fixture
def d8():
    return Domain(TWO_PI, 8)


@pytest.fixture
def lin(d8):
    return GalerkinSystem(d8, linear())


def _traj(domain, times, fn, tau=0.0, rho=None):
    times = np.asarray(times, dtype=float)
    phi = np.array([fn(t) for t in times])
    return Trajectory(times, phi, rho, tau, float(times[1] - times[0]) if len(times) > 1 else 0.0,
                      "imex1_parabolic")


# -- stability -----------------------------------------------------------------

def test_zero_trajectory_has_zero_bounds(d8, lin):
    traj = _traj(d8, [0.0, 0.5, 1.0], lambda t: d8.zeros())
    rep = stability_report(traj, 0.3, lin)
    assert all(v == 0.0 for v in rep.values().values())
    assert rep.tau == 0.3


def test_stability_linear_in_time_hand_quadrature(d8, lin):
    # phi = (1 + t) eps e_1 with lambda_1 = 1/4: |.|_V*^2 = 4 c^2, |.|_W^2 = (1 + 1/16) c^2
    traj = _traj(d8, [0.0, 0.5, 1.0], lambda t: d8.mode(1, (1 + t) * EPS))
    rep = stability_report(traj, None, lin)
    trap = 0.25 * (1 + 2 * 2.25 + 4) * 4 * EPS**2
    assert rep.phi_H1Vstar == pytest.approx(math.sqrt(trap + 4 * EPS**2), rel=1e-14)
    assert rep.phi_LinfW == pytest.approx(2 * EPS * math.sqrt(1.0625), rel=1e-14)
    assert rep.tau_dtt_L2Zstar == 0.0 and rep.sqrt_tau_dt_LinfVstar == 0.0


def test_stability_quadratic_in_time_hand_quadrature(d8, lin):
    traj = _traj(d8, [0.0, 0.5, 1.0], lambda t: d8.mode(1, t * t * EPS))
    rep = stability_report(traj, 0.25, lin)
    # velocities 0.5 eps, 1.5 eps; acceleration 2 eps; Z* weight 1/1.0625^2
    assert rep.sqrt_tau_dt_LinfVstar == pytest.approx(0.5 * 2 * 1.5 * EPS, rel=1e-14)
    assert rep.tau_dtt_L2Zstar == pytest.approx(0.25 * math.sqrt(0.5) * 2 * EPS / 1.0625, rel=1e-14)


def test_stability_monitor_matches_sample_path(d8):
    s = GalerkinSystem(d8, classical())
    st = init_state(s, d8.cosine(1.0, 0.2), d8.cosine(1.0, 0.1), 0.05)
    mon = StabilityMonitor(d8, 1e-3)
    with_mon = run(s, st, StepConfig(1e-3), 0.1, 1e-3, monitor=mon)
    plain = run(s, st, StepConfig(1e-3), 0.1, 1e-3)
    a, b = stability_report(with_mon, None, s), stability_report(plain, None, s)
    for k in ("phi_LinfW", "mu_LinfWstar", "w_LinfH", "sqrt_tau_dt_LinfVstar"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), rel=1e-12)
    # right-endpoint vs trapezoid in the phi part only
    assert a.phi_H1Vstar == pytest.approx(b.phi_H1Vstar, rel=1e-2)
    assert a.tau_dtt_L2Zstar == pytest.approx(b.tau_dtt_L2Zstar, rel=1e-12)


def test_stability_needs_two_samples(d8, lin):
    with pytest.raises(ValueError):
        stability_report(_traj(d8, [0.0], lambda t: d8.zeros()), 0.0, lin)


def test_mu_time_integral(d8):
    s = GalerkinSystem(d8, linear(lam=2.0, nu=1.0))
    zero = _traj(d8, [0.0, 0.5, 1.0], lambda t: d8.zeros())
    assert mu_time_integral_monitor(zero, s) == 0.0
    # constant phi = c: mu_0 = (nu - lam)(-lam) c = 2c, time integral 2cT
    const = _traj(d8, [0.0, 0.5, 1.0], lambda t: d8.constant(0.3))
    c0 = d8.constant(0.3)[(0,)]
    assert mu_time_integral_monitor(const, s) == pytest.approx(2 * c0, rel=1e-14)


# -- errors and rates ---------------------------------------------------------

def test_error_report_self_is_zero(d8, lin):
    traj = _traj(d8, np.linspace(0, 1, 5), lambda t: d8.mode(1, (1 + t) * EPS))
    rep = error_report(traj, traj, lin)
    assert (rep.c0_vstar, rep.l2_w, rep.l2_wstar_mu, rep.l2_h_w) == (0.0, 0.0, 0.0, 0.0)


def test_error_report_constant_shift(d8, lin, caplog):
    shift = d8.mode(0, 0.01)
    base = _traj(d8, np.linspace(0, 1, 5), lambda t: d8.mode(1, (1 + t) * EPS))
    moved = _traj(d8, np.linspace(0, 1, 5), lambda t: d8.mode(1, (1 + t) * EPS) + shift)
    rep = error_report(moved, base, lin)
    # V* weight on the mean mode is 1/|Omega|, W weight is 1; T = 1
    assert rep.c0_vstar == pytest.approx(0.01 / math.sqrt(TWO_PI), rel=1e-13)
    assert rep.l2_w == pytest.approx(0.01, rel=1e-13)
    dw = lin.compute_w(shift) - lin.compute_w(d8.zeros())
    assert rep.l2_h_w == pytest.approx(float(np.linalg.norm(dw)), rel=1e-12, abs=1e-18)
    assert "different phi0" in caplog.text


def test_error_report_time_mismatch(d8, lin):
    a = _traj(d8, [0.0, 0.5, 1.0], lambda t: d8.zeros())
    b = _traj(d8, [0.0, 0.4, 1.0], lambda t: d8.zeros())
    with pytest.raises(ValueError, match="same times"):
        error_report(a, b, lin)


def test_error_report_stride_keeps_endpoint(d8, lin):
    base = _traj(d8, np.linspace(0, 1, 6), lambda t: d8.zeros())
    moved = _traj(d8, np.linspace(0, 1, 6), lambda t: d8.mode(0, t))
    # only the last sample is nonzero-valued at its largest: sup is kept under striding
    assert error_report(moved, base, lin, stride=2).c0_vstar == error_report(moved, base, lin).c0_vstar


TAUS = [2.0**-k for k in (4, 6, 8, 10)]


def test_rate_fit_exact_power_laws():
    fit = rate_fit([(t, t**0.5) for t in TAUS])
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    fit = rate_fit([(t, 3 * t) for t in reversed(TAUS)])
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert [p[0] for p in fit.points] == sorted(TAUS, reverse=True)
    assert set(fit.to_dict()) == {"slope", "intercept", "r_squared", "points"}


@pytest.mark.parametrize("points", [
    [(0.1, 1.0), (0.01, 0.1)],
    [(0.1, 1.0), (0.01, 0.0), (0.001, 0.1)],
    [(0.1, 1.0), (0.1, 0.5), (0.01, 0.1)],
    [(0.1, 1.0), (-0.01, 0.5), (0.01, 0.1)],
])
def test_rate_fit_rejects(points):
    with pytest.raises(ValueError):
        rate_fit(points)


# -- closed forms -----------------------------------------------------------------

def test_mean_oracle_equilibrium_and_zero():
    assert mean_ode_oracle(0.1, 2.0, 1.0, 0.5)(np.linspace(0, 3, 7)) == pytest.approx(0.5, abs=1e-15)
    assert np.all(mean_ode_oracle(0.0, 1.0, 0.0, 0.0)(np.linspace(0, 1, 3)) == 0.0)
    with pytest.raises(ValueError):
        mean_ode_oracle(0.1, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        mean_ode_oracle(0.0, 1.0, 1.0, 0.0, 0.5)


@pytest.mark.parametrize("tau, sigma", [(0.1, 1.0), (0.5, 1.0), (0.25, 1.0), (0.05, 0.1)])
def test_mean_oracle_against_dop853(tau, sigma):
    g, m0, m1 = 0.7, 0.2, -0.4
    sol = solve_ivp(lambda t, y: [y[1], (g - sigma * y[0] - y[1]) / tau], (0, 2), [m0, m1],
                    method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
    ts = np.linspace(0, 2, 9)
    np.testing.assert_allclose(mean_ode_oracle(tau, sigma, g, m0, m1)(ts), sol.sol(ts)[0], rtol=0, atol=1e-10)


def test_damped_solution_zero_stiffness():
    c = damped_linear_solution(0.2, 0.0, 1.0, 0.5, 0.3)
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(c(t), 0.5 + t + (0.3 - 1.0) * 0.2 * (1 - np.exp(-t / 0.2)), atol=1e-15)
    assert damped_linear_solution(0.0, 0.0, 2.0, 1.0)(0.5) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        damped_linear_solution(-0.1, 1.0, 0.0, 1.0)


def test_linear_mode_oracle(d8):
    p = linear()
    assert mode_stiffness(d8.eigenvalues[2], p) == pytest.approx(0.1)
    assert mode_stiffness(d8.eigenvalues[4], p) == pytest.approx(0.1 + 4 * 3 * 4)
    lam = d8.eigenvalues[6]
    A = mode_stiffness(lam, p)
    t = np.linspace(0, 1, 5)
    np.testing.assert_allclose(linear_mode_oracle(lam, p, 0.3)(t), 0.3 * np.exp(-A * t), rtol=1e-14)
    with pytest.raises(ValueError):
        linear_mode_oracle(lam, classical(), 0.3)


def test_oracle_continuous_across_critical_damping():
    a, ts = 2.5, np.linspace(0, 2, 9)
    tau_c = 1 / (4 * a)
    below = damped_linear_solution(tau_c * (1 - 1e-9), a, 0.3, 1.0, -0.5)(ts)
    at = damped_linear_solution(tau_c, a, 0.3, 1.0, -0.5)(ts)
    above = damped_linear_solution(tau_c * (1 + 1e-9), a, 0.3, 1.0, -0.5)(ts)
    np.testing.assert_allclose(below, at, atol=1e-9)
    np.testing.assert_allclose(above, at, atol=1e-9)
    # the critical case solves the ODE: compare with a tight numerical solve
    sol = solve_ivp(lambda t, y: [y[1], (0.3 - a * y[0] - y[1]) / tau_c], (0, 2), [1.0, -0.5],
                    method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
    np.testing.assert_allclose(at, sol.sol(ts)[0], atol=1e-10)


@pytest.mark.parametrize("scheme, tau", [("imex1_parabolic", 0.0), ("imex2_parabolic", 0.0),
                                         ("imex1_hyperbolic", 0.1)])
def test_same_scheme_mean_converges_to_closed_form(scheme, tau):
    exact = float(mean_ode_oracle(tau, 0.5, 1.0, 0.2, -0.3 if tau else 0.0)(1.0))
    errs = [abs(same_scheme_mean(StepConfig(dt, scheme), tau, 0.5, 1.0, 0.2, -0.3 if tau else 0.0,
                                 int(round(1 / dt)))[-1] - exact) for dt in (1e-2, 5e-3, 2.5e-3)]
    order = StepConfig(1.0, scheme).order
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(abs(r - order) < 0.1 for r in rates), rates


# -- manufactured solutions ---------------------------------------------------------

def test_mms_forcing(d8):
    s = GalerkinSystem(d8, classical(), n=4)
    zero = ManufacturedSolution.separable(d8.zeros(), 1.0)
    assert not mms_forcing(zero, s, 0.1)(0.3, d8).any()
    steady = ManufacturedSolution.separable(d8.cosine(1.0, 0.2), 0.0)
    g = mms_forcing(steady, s, 0.1)
    np.testing.assert_array_equal(g(0.0, d8), g(0.7, d8))
    np.testing.assert_allclose(g(0.0, d8), s.potential.sigma * steady.phi(0) + d8.eigenvalues * s.compute_mu(steady.phi(0)))
    with pytest.raises(ValueError, match="retained"):
        mms_forcing(ManufacturedSolution.separable(d8.mode(6, 0.1), 1.0), s, 0.1)
    with pytest.raises(ValueError, match="shape"):
        mms_forcing(ManufacturedSolution.separable(np.zeros(3), 1.0), s, 0.1)


def test_mms_solution_is_reproduced_at_first_order():
    d = Domain(TWO_PI, 16)
    s = GalerkinSystem(d, classical())
    ms = ManufacturedSolution.separable(d.cosine(1.0, 0.1) + d.cosine(2.0, 0.02), 1.0)
    s.forcing = mms_forcing(ms, s, 0.1)
    errs = []
    for dt in (2e-3, 1e-3, 5e-4):
        traj = run(s, init_state(s, ms.phi(0.0), ms.dphi(0.0), 0.1), StepConfig(dt), 0.5)
        errs.append(float(np.max(np.abs(traj.phi[-1] - ms.phi(0.5)))))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(abs(r - 1) < 0.1 for r in rates), rates


# -- sweeps ---------------------------------------------------------------------------

def test_tau_step():
    assert tau_step(2.0**-4, 2e-4, 32, 2e-4) == 2e-4
    assert tau_step(2.0**-12, 2e-4, 32, 2e-4) == pytest.approx(2e-4 / 27)
    assert tau_step(0.5, 0.1, 4) == pytest.approx(0.1)
    assert tau_step(0.5, 0.1, 4, max_dt=0.03) == pytest.approx(0.025)


@pytest.fixture(scope="module")
def small_sweep():
    d = Domain(TWO_PI, 8)
    s = GalerkinSystem(d, classical())
    return SweepSpec(s, d.cosine(1.0, 0.2), d.cosine(1.0, 0.1), (0.025, 0.1, 0.05), 0.1, 0.01, 1e-3,
                     steps_per_tau=8, max_dt=1e-3)


def test_run_sweep(small_sweep):
    res = run_sweep(small_sweep)
    assert res.taus == [0.1, 0.05, 0.025]
    assert [e.tau for e in res.errors] == res.taus
    assert [s.tau for s in res.stability] == res.taus
    assert set(res.fits) == set(ErrorReport.FIELDS)
    assert all(len(t) == 11 for t in res.trajectories)
    # the tau run approaches the reference as tau shrinks
    c0 = [e.c0_vstar for e in res.errors]
    assert c0[0] > c0[1] > c0[2] > 0
    assert res.fits["c0_vstar"].slope > 0
    assert "quadrature_rel_change_on_halving" in res.checks
    assert set(res.summary()) == {"taus", "fits", "stability", "mu_time_integral", "checks"}


def test_run_sweep_parallel_is_identical(small_sweep):
    serial, parallel = run_sweep(small_sweep), run_sweep(small_sweep, jobs=2)
    for a, b in zip(serial.trajectories, parallel.trajectories):
        np.testing.assert_array_equal(a.phi, b.phi)
    assert [e.c0_vstar for e in serial.errors] == [e.c0_vstar for e in parallel.errors]


def test_run_sweep_rejects_duplicates(small_sweep):
    from dataclasses import replace
    with pytest.raises(ValueError, match="duplicate"):
        run_sweep(replace(small_sweep, taus=(0.1, 0.05, 0.05)))
