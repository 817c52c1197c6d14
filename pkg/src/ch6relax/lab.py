"""Verification laboratory: stability monitors, error norms against the
tau = 0 limit, rate fits, closed-form oracles and manufactured solutions.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from ch6relax.galerkin import CallableForcing, GalerkinSystem
from ch6relax.integrators import StepConfig, Trajectory, init_state, run
from ch6relax.potential import PotentialSpec
from ch6relax.sobolev import NormKind, norm_weights, norms

logger = logging.getLogger(__name__)


def _l2_in_time(times, values):
    """Trapezoidal ``(int |v(t)|^2 dt)^(1/2)`` from per-sample norms."""
    if len(times) < 2:
        return 0.0
    return float(np.sqrt(np.trapezoid(np.asarray(values) ** 2, times)))


# -- stability -----------------------------------------------------------------

@dataclass
class StabilityReport:
    phi_H1Vstar: float
    phi_LinfW: float
    mu_LinfWstar: float
    w_LinfH: float
    tau_dtt_L2Zstar: float
    sqrt_tau_dt_LinfVstar: float
    tau: float = 0.0

    FIELDS = ("phi_H1Vstar", "phi_LinfW", "mu_LinfWstar", "w_LinfH",
              "tau_dtt_L2Zstar", "sqrt_tau_dt_LinfVstar")

    def values(self):
        return {k: getattr(self, k) for k in self.FIELDS}


class StabilityMonitor:
    """Per-step accumulator for the time-derivative parts of the bounds.

    Time derivatives of ``phi`` are the integrator's own velocity ``rho`` for
    tau > 0 and backward differences otherwise; ``phi''`` is the backward
    difference of the velocity. Integrals use the right-endpoint rule over
    steps, which matches the first-order schemes.
    """

    def __init__(self, domain, dt):
        self.domain = domain
        self.dt = dt
        self.int_phi2 = 0.0
        self.int_dphi2 = 0.0
        self.sup_dphi = 0.0
        self.int_ddphi2 = 0.0
        self._phi = None
        self._vel = None
        self._w_vstar = norm_weights(domain, NormKind.Vstar)
        self._w_zstar = norm_weights(domain, NormKind.Zstar)

    def _sq(self, w, v):
        return float(np.sum(w * v * v))

    def __call__(self, state):
        first = self._phi is None
        if state.rho is not None:
            vel = state.rho
        elif first:
            vel = None
        else:
            vel = (state.phi - self._phi) / self.dt
        if vel is not None:
            self.sup_dphi = max(self.sup_dphi, math.sqrt(self._sq(self._w_vstar, vel)))
        if not first:
            self.int_phi2 += self.dt * self._sq(self._w_vstar, state.phi)
            self.int_dphi2 += self.dt * self._sq(self._w_vstar, vel)
            if self._vel is not None:
                acc = (vel - self._vel) / self.dt
                self.int_ddphi2 += self.dt * self._sq(self._w_zstar, acc)
        self._phi = state.phi
        self._vel = vel


def stability_report(traj: Trajectory, tau: Optional[float], system: GalerkinSystem) -> StabilityReport:
    """Discrete counterparts of the tau-uniform stability bounds.

    Sup norms of ``phi``, ``mu`` and ``w`` are taken over the samples. The
    time-derivative terms come from an attached :class:`StabilityMonitor`
    when present (step resolution) and from sample differences otherwise.
    ``tau`` defaults to the trajectory's own when None.
    """
    if len(traj) < 2:
        raise ValueError("stability_report needs at least two samples")
    d = system.domain
    tau = traj.tau if tau is None else tau
    w, mu = traj.derived(system)
    phi_w = float(np.max(norms(d, traj.phi, NormKind.W)))
    mu_ws = float(np.max(norms(d, mu, NormKind.Wstar)))
    w_h = float(np.max(norms(d, w, NormKind.H)))

    mon = traj.step_monitor
    if isinstance(mon, StabilityMonitor):
        h1 = math.sqrt(mon.int_phi2 + mon.int_dphi2)
        dtt = math.sqrt(mon.int_ddphi2)
        sup_dt = mon.sup_dphi
    else:
        # difference quotients live on intervals: right-endpoint sums, as in the monitor
        t = traj.times
        shape = (-1,) + (1,) * d.dim
        if traj.rho is not None:
            vel, vel_t = traj.rho, t
            vs = norms(d, vel, NormKind.Vstar)
            int_dphi2 = _l2_in_time(t, vs) ** 2
        else:
            h = np.diff(t)
            vel, vel_t = np.diff(traj.phi, axis=0) / h.reshape(shape), t[1:]
            vs = norms(d, vel, NormKind.Vstar)
            int_dphi2 = float(np.sum(h * vs**2))
        h1 = math.sqrt(_l2_in_time(t, norms(d, traj.phi, NormKind.Vstar)) ** 2 + int_dphi2)
        sup_dt = float(np.max(vs))
        if len(vel) >= 2:
            hv = np.diff(vel_t)
            acc = np.diff(vel, axis=0) / hv.reshape(shape)
            dtt = math.sqrt(float(np.sum(hv * norms(d, acc, NormKind.Zstar) ** 2)))
        else:
            dtt = 0.0
    return StabilityReport(
        phi_H1Vstar=h1,
        phi_LinfW=phi_w,
        mu_LinfWstar=mu_ws,
        w_LinfH=w_h,
        tau_dtt_L2Zstar=tau * dtt,
        sqrt_tau_dt_LinfVstar=math.sqrt(tau) * sup_dt,
        tau=tau,
    )


def mu_time_integral_monitor(traj: Trajectory, system: GalerkinSystem) -> float:
    """``sup_t |int_0^t mu|_V`` by cumulative trapezoid over the samples."""
    if len(traj) < 2:
        raise ValueError("need at least two samples")
    _, mu = traj.derived(system)
    h = np.diff(traj.times).reshape((-1,) + (1,) * system.domain.dim)
    cumulative = np.concatenate([np.zeros_like(mu[:1]), np.cumsum(0.5 * h * (mu[1:] + mu[:-1]), axis=0)])
    return float(np.max(norms(system.domain, cumulative, NormKind.V)))


# -- error against the limit problem ------------------------------------------

@dataclass
class ErrorReport:
    c0_vstar: float
    l2_w: float
    l2_wstar_mu: float
    l2_h_w: float
    tau: float

    FIELDS = ("c0_vstar", "l2_w", "l2_wstar_mu", "l2_h_w")


def error_report(traj_tau: Trajectory, traj_ref: Trajectory, system: GalerkinSystem,
                 stride: int = 1) -> ErrorReport:
    """Norms of ``(phi, mu, w)_tau - (phi, mu, w)_0`` on the shared samples.

    ``stride`` > 1 subsamples both trajectories (quadrature checks).
    """
    if traj_tau.times.shape != traj_ref.times.shape or not np.allclose(
            traj_tau.times, traj_ref.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories are not sampled on the same times")
    if not np.array_equal(traj_tau.phi[0], traj_ref.phi[0]):
        logger.warning("trajectories start from different phi0")
    d = system.domain
    w1, mu1 = traj_tau.derived(system)
    w0, mu0 = traj_ref.derived(system)
    idx = np.arange(0, len(traj_tau), stride)
    if idx[-1] != len(traj_tau) - 1:
        idx = np.append(idx, len(traj_tau) - 1)
    t = traj_tau.times[idx]
    dphi = (traj_tau.phi - traj_ref.phi)[idx]
    return ErrorReport(
        c0_vstar=float(np.max(norms(d, dphi, NormKind.Vstar))),
        l2_w=_l2_in_time(t, norms(d, dphi, NormKind.W)),
        l2_wstar_mu=_l2_in_time(t, norms(d, (mu1 - mu0)[idx], NormKind.Wstar)),
        l2_h_w=_l2_in_time(t, norms(d, (w1 - w0)[idx], NormKind.H)),
        tau=traj_tau.tau,
    )


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: list

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "points": [list(p) for p in self.points]}


def rate_fit(points) -> RateFit:
    """Least-squares line through ``(log tau, log error)``."""
    points = sorted(((float(t), float(e)) for t, e in points), key=lambda p: -p[0])
    if len(points) < 3:
        raise ValueError("rate_fit needs at least 3 points")
    taus = np.array([p[0] for p in points])
    errs = np.array([p[1] for p in points])
    if np.any(np.diff(taus) >= 0):
        raise ValueError("tau values must be distinct")
    if np.any(taus <= 0) or np.any(errs <= 0):
        raise ValueError("tau and error values must be positive")
    x, y = np.log(taus), np.log(errs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, points)


# -- closed-form oracles ------------------------------------------------------

def damped_linear_solution(tau, a, g, c0, c1=0.0):
    """Closed form of ``tau c'' + c' + a c = g``, ``c(0) = c0``, ``c'(0) = c1``.

    Returns ``c(t)`` as a vectorized callable. For tau > 0 the solution is
    written with ``E(t) = exp(alpha t)`` (``alpha = -1/(2 tau)``) as
    ``E cosh(kappa t) D + E sinh(kappa t)/kappa (c1 - alpha D)`` where
    ``D = c0 - g/a``; the sinh term switches to its series near critical
    damping so both branches join continuously.
    """
    tau, a, g, c0, c1 = map(float, (tau, a, g, c0, c1))
    if tau < 0:
        raise ValueError("tau must be nonnegative")

    if a == 0.0:
        if tau == 0.0:
            return lambda t: c0 + g * np.asarray(t, dtype=float)
        return lambda t: (c0 + g * np.asarray(t, dtype=float)
                          + (c1 - g) * tau * -np.expm1(-np.asarray(t, dtype=float) / tau))

    steady = g / a
    D = c0 - steady
    if tau == 0.0:
        return lambda t: steady + D * np.exp(-a * np.asarray(t, dtype=float))

    alpha = -0.5 / tau
    disc = 1.0 - 4.0 * tau * a
    if disc >= 0:
        root = math.sqrt(disc)
        r1 = -2.0 * a / (1.0 + root)      # cancellation-free slow root
        r2 = -(1.0 + root) / (2.0 * tau)
        kappa = complex(0.5 * (r1 - r2))
        r1, r2 = complex(r1), complex(r2)
    else:
        omega = math.sqrt(-disc) / (2.0 * tau)
        kappa = 1j * omega
        r1, r2 = complex(alpha, omega), complex(alpha, -omega)
    B = c1 - alpha * D

    def c(t):
        t = np.asarray(t, dtype=float)
        e1, e2 = np.exp(r1 * t), np.exp(r2 * t)
        ch = 0.5 * (e1 + e2)
        x = kappa * t
        small = np.abs(x) < 1e-3
        with np.errstate(divide="ignore", invalid="ignore"):
            sh = np.where(small,
                          np.exp(alpha * t) * t * (1 + x * x / 6 + x**4 / 120),
                          (e1 - e2) / (2 * kappa if kappa != 0 else 1.0))
        return (steady + D * ch + B * sh).real

    return c


def mean_ode_oracle(tau, sigma, g_mean, m0, m1=0.0, T=None):
    """Closed-form mean value for ``tau m'' + m' + sigma m = g_mean``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if tau == 0 and m1 not in (0.0, None):
        raise ValueError("m1 is not used when tau = 0")
    return damped_linear_solution(tau, sigma, g_mean, m0, m1 or 0.0)


def mode_stiffness(lambda_k, params: PotentialSpec):
    """``A_k = sigma + l_k (l_k - lam) (l_k + nu - lam)``."""
    return params.sigma + lambda_k * (lambda_k - params.lam) * (lambda_k + params.nu - params.lam)


def linear_mode_oracle(lambda_k, params: PotentialSpec, phi0_k, rho0_k=0.0, g_k=0.0, tau=0.0):
    """Closed form of one mode of the beta = 0 system, ``tau c'' + c' + A_k c = g_k``."""
    if params.beta_coeffs:
        raise ValueError("linear_mode_oracle needs the beta = 0 diagnostic potential")
    return damped_linear_solution(tau, mode_stiffness(lambda_k, params), g_k, phi0_k,
                                  rho0_k if tau > 0 else 0.0)


def linear_system_oracle(system: GalerkinSystem, phi0, rho0=None, tau=0.0, g=None):
    """All retained modes of the beta = 0 system; ``t -> coefficient array``.

    ``g`` is a constant forcing in coefficients (zero by default).
    """
    d = system.domain
    phi0 = d.project(np.asarray(phi0, dtype=float), system.n)
    rho0 = d.zeros() if rho0 is None else d.project(np.asarray(rho0, dtype=float), system.n)
    g = d.zeros() if g is None else np.asarray(g, dtype=float) * system.mask
    lam = d.eigenvalues
    sols = {k: linear_mode_oracle(lam[k], system.potential, phi0[k], rho0[k], g[k], tau)
            for k in zip(*np.nonzero(system.mask))}

    def coeffs(t):
        out = d.zeros()
        for k, fn in sols.items():
            out[k] = fn(t)
        return out

    return coeffs


def same_scheme_mean(cfg: StepConfig, tau, sigma, g_mean, m0, m1, nsteps):
    """The integrator's recursion applied to the scalar mean equation."""
    dt = cfg.dt
    m, v = float(m0), float(m1)
    out = [m]
    prev = None
    for _ in range(nsteps):
        if cfg.scheme == "imex1_hyperbolic":
            v = (dt * (g_mean - sigma * m) + tau * v) / (tau + dt + dt * dt * sigma)
            m = m + dt * v
        elif cfg.scheme == "imex1_parabolic" or prev is None:
            new = (m + dt * g_mean) / (1.0 + dt * sigma)
            prev, m = m, new
        else:
            new = (4.0 * m - prev + 2.0 * dt * (2.0 * g_mean - g_mean)) / (3.0 + 2.0 * dt * sigma)
            prev, m = m, new
        out.append(m)
    return np.array(out)


# -- manufactured solutions ---------------------------------------------------

@dataclass
class ManufacturedSolution:
    """Space-time field given by coefficient callables for phi, phi', phi''."""

    phi: Callable
    dphi: Callable
    ddphi: Callable

    @classmethod
    def separable(cls, profile, rate):
        """``phi*(t) = exp(-rate t) * profile`` (profile in coefficients)."""
        profile = np.asarray(profile, dtype=float)
        return cls(lambda t: np.exp(-rate * t) * profile,
                   lambda t: -rate * np.exp(-rate * t) * profile,
                   lambda t: rate * rate * np.exp(-rate * t) * profile)


def mms_forcing(phi_star: ManufacturedSolution, system: GalerkinSystem, tau: float) -> CallableForcing:
    """Forcing making ``phi_star`` an exact solution of the Galerkin system."""
    d = system.domain
    probe = np.asarray(phi_star.phi(0.0), dtype=float)
    if probe.shape != d.modes:
        raise ValueError(f"manufactured field has shape {probe.shape}, expected {d.modes}")
    if np.any(probe * (1 - system.mask) != 0):
        raise ValueError("manufactured solution exceeds the retained modes")
    sigma, lam = system.potential.sigma, d.eigenvalues

    def g(t):
        p = np.asarray(phi_star.phi(t), dtype=float)
        return (tau * np.asarray(phi_star.ddphi(t)) + np.asarray(phi_star.dphi(t))
                + sigma * p + lam * system.compute_mu(p, t))

    return CallableForcing(g, label="manufactured")


# -- tau sweep ------------------------------------------------------------------

@dataclass
class SweepSpec:
    """Everything needed to run one tau sweep (picklable)."""

    system: GalerkinSystem
    phi0: np.ndarray
    rho0: Optional[np.ndarray]
    taus: tuple
    T: float
    save_every: float
    ref_dt: float
    ref_scheme: str = "imex2_parabolic"
    steps_per_tau: int = 32
    max_dt: Optional[float] = None


@dataclass
class SweepResult:
    taus: list
    errors: list
    stability: list
    mu_integral: list
    fits: dict
    reference: Trajectory = field(repr=False)
    trajectories: list = field(repr=False)
    checks: dict = field(default_factory=dict)

    def summary(self):
        return {
            "taus": self.taus,
            "fits": {k: v.to_dict() for k, v in self.fits.items()},
            "stability": [asdict(s) for s in self.stability],
            "mu_time_integral": self.mu_integral,
            "checks": self.checks,
        }


def tau_step(tau, save_every, steps_per_tau, max_dt=None):
    """Largest step dividing ``save_every`` with at least ``steps_per_tau``
    steps per tau and no larger than ``max_dt``."""
    need = save_every * steps_per_tau / tau
    if max_dt is not None:
        need = max(need, save_every / max_dt)
    return save_every / max(1, math.ceil(need - 1e-9))


def _run_tau(args):
    spec, tau = args
    system = spec.system
    dt = tau_step(tau, spec.save_every, spec.steps_per_tau, spec.max_dt)
    monitor = StabilityMonitor(system.domain, dt)
    state = init_state(system, spec.phi0, spec.rho0, tau)
    traj = run(system, state, StepConfig(dt, "imex1_hyperbolic"), spec.T, spec.save_every, monitor=monitor)
    return traj


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Reference tau = 0 run, then every tau; reports sorted by decreasing tau."""
    system = spec.system
    taus = sorted((float(t) for t in spec.taus), reverse=True)
    if len(set(taus)) != len(taus):
        raise ValueError("duplicate tau values")
    ref_state = init_state(system, spec.phi0)
    ref_cfg = StepConfig(spec.ref_dt, spec.ref_scheme)
    logger.info("reference run: scheme=%s dt=%g", spec.ref_scheme, spec.ref_dt)
    reference = run(system, ref_state, ref_cfg, spec.T, spec.save_every)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trajs = list(pool.map(_run_tau, [(spec, t) for t in taus]))
    else:
        trajs = []
        for t in taus:
            logger.info("tau=%g", t)
            trajs.append(_run_tau((spec, t)))

    errors = [error_report(tr, reference, system) for tr in trajs]
    stability = [stability_report(tr, None, system) for tr in trajs]
    mu_int = [mu_time_integral_monitor(tr, system) for tr in trajs]
    fits = {name: rate_fit([(e.tau, getattr(e, name)) for e in errors]) for name in ErrorReport.FIELDS}

    # quadrature: halve the sampling and compare the L2-in-time norms
    coarse = [error_report(tr, reference, system, stride=2) for tr in trajs]
    quad = max(abs(getattr(c, k) - getattr(e, k)) / getattr(e, k)
               for c, e in zip(coarse, errors) for k in ("l2_w", "l2_wstar_mu", "l2_h_w"))
    checks = {"quadrature_rel_change_on_halving": quad}
    return SweepResult(taus, errors, stability, mu_int, fits, reference, trajs, checks)


def reference_error_estimate(system, phi0, T, dt, scheme="imex2_parabolic", save_every=None):
    """Richardson estimate of the reference's time error in ``C0(V*)``.

    Runs at ``dt`` and ``2 dt``; the difference divided by ``2^p - 1``
    estimates the error of the finer run.
    """
    cfg = StepConfig(dt, scheme)
    save_every = T if save_every is None else save_every
    fine = run(system, init_state(system, phi0), cfg, T, save_every)
    coarse = run(system, init_state(system, phi0), StepConfig(2 * dt, scheme), T, save_every)
    diff = norms(system.domain, fine.phi - coarse.phi, NormKind.Vstar)
    return float(np.max(diff)) / (2**cfg.order - 1)
