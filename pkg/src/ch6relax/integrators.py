"""Fixed-step IMEX integrators for the reduced system.

Every scheme treats the diagonal stiffness ``A`` implicitly and the
nonlinear remainder ``N`` explicitly, so each step is a per-mode scalar
(or 2x2) solve. With ``R^n = g(t^n) - N(phi^n)``:

imex1_parabolic (tau = 0)
    (phi' - phi) / dt + A phi' = R^n
imex2_parabolic (tau = 0)
    SBDF2: (3 phi' - 4 phi + phi_prev) / (2 dt) + A phi' = 2 R^n - R^{n-1},
    started with one imex1 step
imex1_hyperbolic (tau > 0)
    tau (rho' - rho) / dt + rho' + A phi' = R^n,  phi' = phi + dt rho'

Primes denote the new time level.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ch6relax.exceptions import NumericalOverflowError, StepSizeError
from ch6relax.galerkin import GalerkinSystem

logger = logging.getLogger(__name__)

SCHEMES = ("imex1_hyperbolic", "imex1_parabolic", "imex2_parabolic")
ORDER = {"imex1_hyperbolic": 1, "imex1_parabolic": 1, "imex2_parabolic": 2}


@dataclass(frozen=True)
class SolverState:
    phi: np.ndarray
    rho: Optional[np.ndarray]
    t: float
    tau: float
    # (phi, R) at the previous level, only used by the two-step scheme
    history: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if (self.tau > 0) != (self.rho is not None):
            raise ValueError("rho is required exactly when tau > 0")


@dataclass(frozen=True)
class StepConfig:
    dt: float
    scheme: str = "imex1_hyperbolic"
    guard: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    @property
    def order(self):
        return ORDER[self.scheme]

    @property
    def hyperbolic(self):
        return self.scheme.endswith("hyperbolic")


def init_state(system: GalerkinSystem, phi0, rho0=None, tau=0.0) -> SolverState:
    """Project the initial data onto V_n. ``rho0`` defaults to 0 when tau > 0."""
    d = system.domain
    phi0 = np.asarray(phi0, dtype=float)
    if phi0.shape != d.modes:
        raise ValueError(f"phi0 has shape {phi0.shape}, expected {d.modes}")
    if tau == 0:
        if rho0 is not None:
            raise ValueError("rho0 must be omitted for tau = 0")
        return SolverState(d.project(phi0, system.n), None, 0.0, 0.0)
    if not 0 < tau < 1:
        raise ValueError("tau must lie in [0, 1)")
    rho0 = d.zeros() if rho0 is None else np.asarray(rho0, dtype=float)
    if rho0.shape != d.modes:
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {d.modes}")
    return SolverState(d.project(phi0, system.n), d.project(rho0, system.n), 0.0, float(tau))


def _explicit(system, phi, t):
    return system.forcing_at(t) - system.nonlinear_remainder(phi, t)


def _finite(arrays, t):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalOverflowError("non-finite state after step", t)


def step_parabolic(state: SolverState, cfg: StepConfig, system: GalerkinSystem) -> SolverState:
    if state.tau != 0:
        raise ValueError("parabolic schemes require tau = 0")
    if cfg.hyperbolic:
        raise ValueError(f"scheme {cfg.scheme} is not a parabolic scheme")
    dt, A = cfg.dt, system.stiffness
    r_now = _explicit(system, state.phi, state.t)
    if cfg.scheme == "imex1_parabolic" or state.history is None:
        denom = 1.0 + dt * A
        if cfg.guard and np.any(denom <= 0):
            raise StepSizeError("positivity guard violated: 1 + dt*A_k <= 0", state.t)
        phi = (state.phi + dt * r_now) / denom
    else:
        phi_prev, r_prev = state.history
        denom = 3.0 + 2.0 * dt * A
        if cfg.guard and np.any(denom <= 0):
            raise StepSizeError("positivity guard violated: 3 + 2*dt*A_k <= 0", state.t)
        phi = (4.0 * state.phi - phi_prev + 2.0 * dt * (2.0 * r_now - r_prev)) / denom
    t = state.t + dt
    _finite([phi], t)
    history = (state.phi, r_now) if cfg.scheme == "imex2_parabolic" else None
    return SolverState(phi, None, t, 0.0, history)


def step_hyperbolic(state: SolverState, cfg: StepConfig, system: GalerkinSystem) -> SolverState:
    if state.tau <= 0:
        raise ValueError("the hyperbolic scheme requires tau > 0")
    if not cfg.hyperbolic:
        raise ValueError(f"scheme {cfg.scheme} is not a hyperbolic scheme")
    dt, tau, A = cfg.dt, state.tau, system.stiffness
    r_now = _explicit(system, state.phi, state.t)
    # determinant of the per-mode 2x2 system, scaled by dt
    det = tau + dt + dt * dt * A
    if cfg.guard and np.any(det <= 0):
        raise StepSizeError("positivity guard violated: tau + dt + dt^2*A_k <= 0", state.t)
    rho = (dt * (r_now - A * state.phi) + tau * state.rho) / det
    phi = state.phi + dt * rho
    t = state.t + dt
    _finite([phi, rho], t)
    return SolverState(phi, rho, t, tau)


def step(state, cfg, system):
    if cfg.hyperbolic:
        return step_hyperbolic(state, cfg, system)
    return step_parabolic(state, cfg, system)


@dataclass
class Trajectory:
    """Sampled states of one run.

    ``phi`` (and ``rho`` for tau > 0) are stacked with the sample index
    first. ``monitors`` maps names to per-sample values; ``step_monitor``
    holds whatever per-step accumulator was attached to the run.
    """

    times: np.ndarray
    phi: np.ndarray
    rho: Optional[np.ndarray]
    tau: float
    dt: float
    scheme: str
    monitors: dict = field(default_factory=dict)
    step_monitor: object = None
    _derived: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.times)

    def derived(self, system: GalerkinSystem):
        """``(w, mu)`` stacks recomputed from the sampled ``phi`` (cached)."""
        key = id(system)
        if key not in self._derived:
            pairs = [system.fields(p, t)[:2] for p, t in zip(self.phi, self.times)]
            w = np.array([p[0] for p in pairs])
            mu = np.array([p[1] for p in pairs])
            self._derived[key] = (w, mu)
        return self._derived[key]

    def final(self) -> SolverState:
        rho = None if self.rho is None else self.rho[-1]
        return SolverState(self.phi[-1], rho, float(self.times[-1]), self.tau)


def _as_count(total, dt, name):
    count = total / dt
    rounded = int(round(count))
    if abs(count - rounded) > 1e-9 * max(1.0, count):
        raise ValueError(f"{name}={total!r} is not a multiple of dt={dt!r}")
    return rounded


def run(system: GalerkinSystem, state: SolverState, cfg: StepConfig, T: float,
        save_every: Optional[float] = None,
        monitor: Optional[Callable] = None,
        sample_monitor: Optional[Callable] = None) -> Trajectory:
    """March from ``state`` (at t = 0) to ``T`` with a fixed step.

    Samples are taken at t = 0, every ``save_every`` and at ``T``. Times
    are ``i * dt`` exactly, so runs sharing ``dt`` and ``T`` agree at the
    shared sample times whatever the save interval.

    ``monitor(state)`` is called at t = 0 and after every step;
    ``sample_monitor(state) -> dict`` is called at each sample and its values
    are collected into ``Trajectory.monitors``.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if cfg.hyperbolic != (state.tau > 0):
        raise ValueError(f"scheme {cfg.scheme} is incompatible with tau={state.tau}")
    nsteps = _as_count(T, cfg.dt, "T")
    stride = nsteps if save_every is None else _as_count(save_every, cfg.dt, "save_every")
    stride = max(stride, 1)

    times, phis, rhos = [], [], []
    monitors: dict = {}

    def sample(s, i):
        times.append(i * cfg.dt)
        phis.append(s.phi)
        if s.rho is not None:
            rhos.append(s.rho)
        if sample_monitor is not None:
            for key, value in sample_monitor(s).items():
                monitors.setdefault(key, []).append(value)

    sample(state, 0)
    if monitor is not None:
        monitor(state)
    for i in range(1, nsteps + 1):
        try:
            state = step(state, cfg, system)
        except (StepSizeError, NumericalOverflowError):
            logger.error("step %d failed at t=%.6g", i, (i - 1) * cfg.dt)
            raise
        state = replace(state, t=i * cfg.dt)
        if monitor is not None:
            monitor(state)
        if i % stride == 0 or i == nsteps:
            sample(state, i)

    return Trajectory(
        times=np.array(times),
        phi=np.array(phis),
        rho=np.array(rhos) if rhos else None,
        tau=state.tau,
        dt=cfg.dt,
        scheme=cfg.scheme,
        monitors={k: np.array(v) for k, v in monitors.items()},
        step_monitor=monitor,
    )

