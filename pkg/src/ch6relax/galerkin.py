"""Reduced Faedo-Galerkin system on the first ``n`` eigenmodes.

With ``Lam = diag(l_k)`` and the potential split ``f = beta - lam s``::

    w   = -Lap phi + beta(phi) - lam phi                  (pointwise)
    mu  = Lam P[w] + P[beta'(phi) w] + (nu - lam) P[w]
    tau phi'' + phi' = g - sigma phi - Lam mu

The right-hand side is split for IMEX stepping as ``g - A phi - N(phi)``
with the diagonal linearization about ``phi = 0``::

    A_k = sigma + l_k (l_k - lam) (l_k + nu - lam)

(``beta'(0) = 0`` makes the remainder ``N`` purely nonlinear).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ch6relax.exceptions import NumericalOverflowError
from ch6relax.potential import PotentialSpec, beta_eval
from ch6relax.spectral import Domain, dealiased_grid_size

logger = logging.getLogger(__name__)


# -- forcing -----------------------------------------------------------------

@dataclass(frozen=True)
class ZeroForcing:
    def __call__(self, t, domain):
        return domain.zeros()


@dataclass(frozen=True)
class ConstantForcing:
    """Spatially constant, time-independent forcing ``g = value``."""

    value: float

    def __call__(self, t, domain):
        return domain.constant(self.value)


@dataclass(frozen=True)
class SeriesForcing:
    """Coefficient snapshots ``coeffs[i]`` at ``times[i]``, linearly interpolated.

    Held constant outside the sampled interval.
    """

    times: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
            raise ValueError("forcing times must be a nonempty increasing sequence")
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape[0] != times.size or not np.all(np.isfinite(coeffs)):
            raise ValueError("forcing coefficients must be finite, one snapshot per time")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, t, domain):
        i = int(np.searchsorted(self.times, t, side="right"))
        if i == 0:
            return self.coeffs[0].copy()
        if i == self.times.size:
            return self.coeffs[-1].copy()
        t0, t1 = self.times[i - 1], self.times[i]
        a = (t - t0) / (t1 - t0)
        return (1 - a) * self.coeffs[i - 1] + a * self.coeffs[i]


@dataclass(frozen=True)
class CallableForcing:
    """Forcing given by ``fn(t) -> coefficients`` (manufactured solutions)."""

    fn: object
    label: str = "callable"

    def __call__(self, t, domain):
        return np.asarray(self.fn(t), dtype=float)


# -- system ------------------------------------------------------------------

@dataclass
class GalerkinSystem:
    domain: Domain
    potential: PotentialSpec
    forcing: object = field(default_factory=ZeroForcing)
    n: object = None

    def __post_init__(self):
        if self.n is None:
            self.n = self.domain.modes
        n = (self.n,) * self.domain.dim if np.isscalar(self.n) else tuple(self.n)
        if len(n) != self.domain.dim or any(j < 1 or j > m for j, m in zip(n, self.domain.modes)):
            raise ValueError(f"retained modes {n} must lie in 1..{self.domain.modes}")
        self.n = n
        self.mask = self.domain.project(np.ones(self.domain.modes), n)
        lam_k = self.domain.eigenvalues
        p = self.potential
        self._quadratic = lam_k * (lam_k - p.lam) * (lam_k + p.nu - p.lam)
        self.stiffness = (p.sigma + self._quadratic) * self.mask
        if self.domain.dealias:
            need = dealiased_grid_size(max(self.n), p.degree)
            if min(self.domain.grid) < need:
                logger.warning("grid %s is below the alias-free size %d for degree %d",
                               self.domain.grid, need, p.degree)

    def fields(self, phi, t=None):
        """``(w, mu, mu_nl)`` for the state ``phi``.

        ``mu_nl`` collects the terms of ``mu`` that vanish when beta = 0;
        the product ``beta'(phi) w`` uses the pointwise ``w`` rather than its
        projection, as in the variational form tested with ``v = e_i``.
        """
        d, p = self.domain, self.potential
        phi = np.asarray(phi, dtype=float) * self.mask
        lam_k = d.eigenvalues
        w_lin = (lam_k - p.lam) * phi
        if not p.beta_coeffs:
            w = w_lin
            mu_nl = np.zeros_like(phi)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                values = d.inverse(phi)
                beta_values = beta_eval(p, values)
                product = beta_eval(p, values, 1) * (d.inverse(w_lin) + beta_values)
            if not (np.all(np.isfinite(beta_values)) and np.all(np.isfinite(product))):
                raise NumericalOverflowError("non-finite values evaluating beta(phi)", t)
            beta_hat = d.forward(beta_values) * self.mask
            w = w_lin + beta_hat
            mu_nl = (lam_k + p.nu - p.lam) * beta_hat + d.forward(product) * self.mask
        mu = (lam_k + p.nu - p.lam) * w_lin + mu_nl
        return w, mu, mu_nl

    def compute_w(self, phi, t=None):
        """Coefficients of ``w = -Lap phi + beta(phi) - lam phi`` in V_n."""
        return self.fields(phi, t)[0]

    def compute_mu(self, phi, t=None):
        return self.fields(phi, t)[1]

    def forcing_at(self, t):
        return np.asarray(self.forcing(t, self.domain), dtype=float) * self.mask

    def rhs_first_equation(self, phi, t=0.0):
        """``g(t) - sigma phi - Lam mu(phi)``, so that ``tau phi'' + phi' = rhs``."""
        phi = np.asarray(phi, dtype=float) * self.mask
        mu = self.compute_mu(phi, t)
        return self.forcing_at(t) - self.potential.sigma * phi - self.domain.eigenvalues * mu

    def linear_stiffness(self, k=None):
        """Diagonal implicit coefficient ``A_k`` (all modes if ``k`` is None)."""
        if k is None:
            return self.stiffness.copy()
        return float(self.stiffness[k])

    def nonlinear_remainder(self, phi, t=None):
        """``N(phi)`` with ``rhs = g - A phi - N(phi)``; exactly zero on mode 0."""
        mu_nl = self.fields(phi, t)[2]
        return self.domain.eigenvalues * mu_nl
