"""Named self-checks run by ``ch6relax verify``.

Each check takes a :class:`CheckContext` and returns ``(passed, detail)``.
They are fast (a few seconds in total) and exercise the operator
identities, the Galerkin assembly and the integrators against oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ch6relax.galerkin import ConstantForcing, GalerkinSystem
from ch6relax.integrators import StepConfig, init_state, run
from ch6relax.lab import (ManufacturedSolution, linear_system_oracle, mean_ode_oracle,
                          mms_forcing, rate_fit, same_scheme_mean)
from ch6relax.potential import PotentialSpec, classical, linear
from ch6relax.sobolev import NormKind, energy, inv_neumann, norm, pairing
from ch6relax.spectral import Domain


@dataclass
class CheckContext:
    domain: Domain = field(default_factory=lambda: Domain(2 * math.pi, 32))
    potential: PotentialSpec = field(default_factory=classical)
    seed: int = 0
    samples: int = 100

    def rng(self):
        return np.random.default_rng(self.seed)

    def random_fields(self, decay=0.05):
        """Random coefficient arrays with Gaussian spectral decay."""
        rng = self.rng()
        envelope = np.exp(-decay * self.domain.eigenvalues)
        return [rng.standard_normal(self.domain.modes) * envelope for _ in range(self.samples)]


def _worst(values):
    return float(max(values)) if len(values) else 0.0


def check_transform_roundtrip(ctx):
    d = ctx.domain
    err = _worst([np.max(np.abs(d.forward(d.inverse(c)) - c)) for c in ctx.random_fields()])
    return err <= 1e-12, f"max |forward(inverse(c)) - c| = {err:.3e}"


def check_neumann_inverse(ctx):
    d = ctx.domain
    err = 0.0
    for z in ctx.random_fields():
        lhs = -d.laplacian(inv_neumann(d, z))
        rhs = z - d.constant(d.mean(z))
        err = max(err, float(np.max(np.abs(lhs - rhs))))
    return err <= 1e-12, f"max |-Lap N z - (z - mean z)| = {err:.3e}"


def check_neumann_mean_zero(ctx):
    d = ctx.domain
    err = _worst([abs(d.mean(inv_neumann(d, z))) for z in ctx.random_fields()])
    return err <= 1e-12, f"max |mean N z| = {err:.3e}"


def check_neumann_pairing(ctx):
    d = ctx.domain
    lam = d.eigenvalues
    pos = lam > 0
    err = 0.0
    for z in ctx.random_fields():
        expect = float(np.sum(z[pos] ** 2 / lam[pos]))
        err = max(err, abs(pairing(z, inv_neumann(d, z)) - expect) / max(1.0, expect))
    return err <= 1e-12, f"max rel |<z, N z> - sum z_k^2 / l_k| = {err:.3e}"


def check_laplacian_commutes(ctx):
    d = ctx.domain
    n = tuple(max(2, m // 2) for m in d.modes)
    err = _worst([np.max(np.abs(d.laplacian(d.project(c, n)) - d.project(d.laplacian(c), n)))
                  for c in ctx.random_fields()])
    return err <= 1e-12, f"max |Lap P c - P Lap c| = {err:.3e}"


def check_dealiasing(ctx):
    """mu on the default grid equals mu on a much finer grid."""
    d, p = ctx.domain, ctx.potential
    fine = Domain(d.lengths, d.modes, tuple(2 * g for g in d.grid))
    coarse_sys, fine_sys = GalerkinSystem(d, p), GalerkinSystem(fine, p)
    err = 0.0
    for c in ctx.random_fields()[:10]:
        c = 0.3 * c / max(1.0, norm(d, c, NormKind.W))
        err = max(err, float(np.max(np.abs(coarse_sys.compute_mu(c) - fine_sys.compute_mu(c)))))
    return err <= 1e-11, f"max |mu(grid) - mu(2*grid)| = {err:.3e}"


def check_linear_mu(ctx):
    """beta = 0: mu_k = (l_k + nu - lam)(l_k - lam) eps for phi = eps e_k."""
    d = ctx.domain
    p = linear(ctx.potential.lam, ctx.potential.nu, ctx.potential.sigma)
    s = GalerkinSystem(d, p)
    lam = d.eigenvalues
    err = 0.0
    for k in np.ndindex(*d.modes):
        mu = s.compute_mu(d.mode(k, 1e-3))
        expect = (lam[k] + p.nu - p.lam) * (lam[k] - p.lam) * 1e-3
        others = mu.copy()
        others[k] = 0.0
        err = max(err, abs(mu[k] - expect) / max(1.0, abs(expect)), float(np.max(np.abs(others))))
    return err <= 1e-12, f"max deviation = {err:.3e}"


def check_rhs_split(ctx):
    """``g - A phi - N(phi)`` reproduces ``g - sigma phi - Lam mu``."""
    d = ctx.domain
    s = GalerkinSystem(d, ctx.potential)
    err = 0.0
    for c in ctx.random_fields()[:20]:
        c = 0.5 * c / norm(d, c, NormKind.W)
        split = -s.stiffness * c - s.nonlinear_remainder(c)
        full = s.rhs_first_equation(c)
        err = max(err, float(np.max(np.abs(split - full))) / max(1.0, float(np.max(np.abs(full)))))
    return err <= 1e-12, f"max rel |split - assembled| = {err:.3e}"


def check_energy_gradient(ctx):
    """``<mu(phi), v>`` is the directional derivative of the energy."""
    d = ctx.domain
    p = ctx.potential
    s = GalerkinSystem(d, p)
    worst = 0.0
    for c, v in zip(ctx.random_fields()[:5], ctx.random_fields()[5:10]):
        c = 0.5 * c / norm(d, c, NormKind.W)
        v = v / norm(d, v, NormKind.W)
        h = 1e-5
        fd = (energy(d, c + h * v, p).total - energy(d, c - h * v, p).total) / (2 * h)
        exact = pairing(s.compute_mu(c), v)
        worst = max(worst, abs(fd - exact) / max(1e-12, abs(exact)))
    return worst <= 1e-6, f"max rel |dE[v] - <mu, v>| = {worst:.3e}"


def check_mean_recursion(ctx):
    d = Domain(ctx.domain.lengths, 8)
    p = ctx.potential
    s = GalerkinSystem(d, p, ConstantForcing(0.5))
    phi0 = d.constant(0.2) + d.mode((1,) * d.dim, 0.1)
    rho0 = d.constant(-0.3)
    worst = 0.0
    for tau, scheme in ((0.05, "imex1_hyperbolic"), (0.0, "imex1_parabolic"), (0.0, "imex2_parabolic")):
        cfg = StepConfig(1e-3, scheme)
        traj = run(s, init_state(s, phi0, rho0 if tau else None, tau), cfg, 0.2, cfg.dt)
        means = np.array([d.mean(c) for c in traj.phi])
        rec = same_scheme_mean(cfg, tau, p.sigma, 0.5, d.mean(phi0), d.mean(rho0) if tau else 0.0,
                               len(traj) - 1)
        worst = max(worst, float(np.max(np.abs(means - rec))))
    return worst <= 1e-13, f"max |mean(phi^n) - scalar recursion| = {worst:.3e}"


def check_mean_oracle(ctx):
    """Closed-form mean against a tight numerical ODE solve."""
    tau, sigma, g = 0.1, 1.0, 1.0
    sol = solve_ivp(lambda t, y: [y[1], (g - sigma * y[0] - y[1]) / tau], (0, 1), [0.0, 0.0],
                    method="DOP853", rtol=1e-13, atol=1e-15)
    err = abs(float(mean_ode_oracle(tau, sigma, g, 0.0, 0.0)(1.0)) - sol.y[0, -1])
    return err <= 1e-10, f"|closed form - DOP853| at t=1 = {err:.3e}"


def check_linear_oracle(ctx):
    """beta = 0 solver converges to the closed form at first order."""
    d = Domain(ctx.domain.lengths, 8)
    s = GalerkinSystem(d, linear(ctx.potential.lam, ctx.potential.nu, ctx.potential.sigma))
    phi0 = d.mode((1,) * d.dim, 0.1) + d.constant(0.05)
    rho0 = d.mode((1,) * d.dim, -0.05)
    exact = linear_system_oracle(s, phi0, rho0, 0.1)(0.5)
    errs = []
    for dt in (1e-3, 5e-4):
        traj = run(s, init_state(s, phi0, rho0, 0.1), StepConfig(dt), 0.5)
        errs.append(float(np.max(np.abs(traj.phi[-1] - exact))))
    order = math.log2(errs[0] / errs[1])
    return abs(order - 1) <= 0.2, f"errors {errs[0]:.3e}, {errs[1]:.3e}; order {order:.3f}"


def check_mms(ctx):
    """Manufactured solution is recovered at first order by the hyperbolic scheme."""
    d = Domain(2 * math.pi, 16)
    s = GalerkinSystem(d, ctx.potential)
    ms = ManufacturedSolution.separable(d.cosine(1.0, 0.1), 1.0)
    s.forcing = mms_forcing(ms, s, 0.1)
    errs = []
    for dt in (2e-3, 1e-3):
        traj = run(s, init_state(s, ms.phi(0.0), ms.dphi(0.0), 0.1), StepConfig(dt), 0.5)
        errs.append(float(np.max(np.abs(traj.phi[-1] - ms.phi(0.5)))))
    order = math.log2(errs[0] / errs[1])
    return abs(order - 1) <= 0.2, f"errors {errs[0]:.3e}, {errs[1]:.3e}; order {order:.3f}"


def check_energy_decay(ctx):
    d = Domain(2 * math.pi, 16)
    p = ctx.potential.with_(sigma=0.0, diagnostic=True)
    s = GalerkinSystem(d, p)
    phi0 = d.cosine(1.0, 0.2) + d.cosine(2.0, 0.05)
    values = []
    run(s, init_state(s, phi0), StepConfig(1e-3, "imex1_parabolic"), 0.5,
        monitor=lambda st: values.append(energy(d, st.phi, p).total))
    rise = float(np.max(np.diff(values)))
    return rise <= 1e-8, f"largest per-step energy change = {rise:.3e}"


def check_rate_fit(ctx):
    taus = [2.0**-k for k in (4, 6, 8, 10)]
    fit = rate_fit([(t, 3.0 * t**0.5) for t in taus])
    err = max(abs(fit.slope - 0.5), abs(fit.intercept - math.log(3.0)), abs(fit.r_squared - 1))
    return err <= 1e-12, f"slope {fit.slope:.15f}, r2 {fit.r_squared:.15f}"


CHECKS = {
    "transform_roundtrip": check_transform_roundtrip,
    "neumann_inverse": check_neumann_inverse,
    "neumann_mean_zero": check_neumann_mean_zero,
    "neumann_pairing": check_neumann_pairing,
    "laplacian_commutes_with_projection": check_laplacian_commutes,
    "dealiasing_exact": check_dealiasing,
    "linear_mu_single_mode": check_linear_mu,
    "rhs_split_consistent": check_rhs_split,
    "mu_is_energy_gradient": check_energy_gradient,
    "mean_scalar_recursion": check_mean_recursion,
    "mean_closed_form": check_mean_oracle,
    "linear_oracle_order": check_linear_oracle,
    "manufactured_solution_order": check_mms,
    "energy_nonincreasing": check_energy_decay,
    "rate_fit_exact_power_law": check_rate_fit,
}


def run_checks(ctx=None, names=None):
    """Run the named checks (all by default); yields ``(name, passed, detail)``."""
    ctx = CheckContext() if ctx is None else ctx
    for name in names or CHECKS:
        try:
            passed, detail = CHECKS[name](ctx)
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        yield name, bool(passed), detail
