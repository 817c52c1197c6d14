"""Double-well structure F(s) = beta_hat(s) - (lam/2) s^2.

The convex part is an odd polynomial ``beta(s) = sum_d c_d s^d`` with odd
degrees >= 3, which makes ``beta(0) = beta''(0) = 0`` hold by construction.
The classical quartic potential ``F(s) = (s^2 - 1)^2 / 4`` is
``beta(s) = s^3`` with ``lam = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np


@dataclass(frozen=True)
class PotentialSpec:
    """Nonlinearity and scalar coefficients of the system.

    Parameters
    ----------
    beta_coeffs : tuple of (degree, coefficient)
        Monomials of ``beta``. Outside diagnostic mode only odd degrees >= 3
        with positive coefficients are accepted.
    lam : float
        Splitting constant (> 0).
    nu : float
        Weight of the Ginzburg-Landau part of the energy; any sign.
    sigma : float
        Reaction coefficient (> 0).
    offset : float
        Additive constant of ``beta_hat``; 1/4 reproduces the classical F.
    diagnostic : bool
        Lift the structural checks, so that ``sigma = 0``, ``beta = 0`` or
        raw coefficients can be used for closed-form oracles.
    """

    beta_coeffs: tuple = ((3, 1.0),)
    lam: float = 1.0
    nu: float = 1.0
    sigma: float = 0.1
    offset: float = 0.25
    diagnostic: bool = False

    def __post_init__(self):
        coeffs = tuple((int(d), float(c)) for d, c in self.beta_coeffs)
        object.__setattr__(self, "beta_coeffs", coeffs)
        if any(d < 0 for d, _ in coeffs):
            raise ValueError("beta degrees must be nonnegative")
        if self.diagnostic:
            return
        if not coeffs:
            raise ValueError("beta must be nonzero outside diagnostic mode")
        for d, c in coeffs:
            if d < 3 or d % 2 == 0:
                raise ValueError(f"beta degree {d} is not an odd integer >= 3")
            if c <= 0:
                raise ValueError(f"beta coefficient for degree {d} must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def degree(self) -> int:
        """Highest polynomial degree of beta (1 for beta = 0)."""
        return max((d for d, c in self.beta_coeffs if c != 0.0), default=1)

    def with_(self, **changes) -> PotentialSpec:
        fields = dict(
            beta_coeffs=self.beta_coeffs, lam=self.lam, nu=self.nu,
            sigma=self.sigma, offset=self.offset, diagnostic=self.diagnostic,
        )
        fields.update(changes)
        return PotentialSpec(**fields)


def classical(lam=1.0, nu=1.0, sigma=0.1) -> PotentialSpec:
    return PotentialSpec(((3, 1.0),), lam=lam, nu=nu, sigma=sigma)


def linear(lam=1.0, nu=1.0, sigma=0.1) -> PotentialSpec:
    """beta = 0; only valid as a diagnostic (violates superlinear growth)."""
    return PotentialSpec((), lam=lam, nu=nu, sigma=sigma, diagnostic=True)


def beta_eval(spec: PotentialSpec, s, order: int = 0):
    """``order``-th derivative of beta at ``s`` (scalar or array)."""
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be 0..3, got {order!r}")
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for d, c in spec.beta_coeffs:
        if d < order:
            continue
        out = out + c * (factorial(d) // factorial(d - order)) * s ** (d - order)
    return out if out.ndim else float(out)


def beta_hat(spec: PotentialSpec, s):
    """Antiderivative of beta, ``offset`` at the origin."""
    s = np.asarray(s, dtype=float)
    out = np.full_like(s, spec.offset)
    for d, c in spec.beta_coeffs:
        out = out + c * s ** (d + 1) / (d + 1)
    return out if out.ndim else float(out)


def f_eval(spec: PotentialSpec, s):
    """f = F' = beta - lam s."""
    return beta_eval(spec, s) - spec.lam * np.asarray(s, dtype=float)


def F_eval(spec: PotentialSpec, s):
    return beta_hat(spec, s) - 0.5 * spec.lam * np.asarray(s, dtype=float) ** 2


@dataclass
class ValidationReport:
    zero_at_origin: bool
    beta3_nonnegative: bool
    superlinear: bool
    c_beta: float
    min_beta3: float
    diagnostic: bool

    @property
    def ok(self) -> bool:
        return (self.zero_at_origin and self.beta3_nonnegative
                and self.superlinear and np.isfinite(self.c_beta))


def validate_assumptions(spec: PotentialSpec, sample_range=(-10.0, 10.0), n_samples=101):
    """Check the structural assumptions on beta over a sampling grid.

    The growth condition ``beta'(s)/|s| -> inf`` cannot be certified on a
    finite grid; it is proxied by requiring ``beta'(s)/|s|`` to be
    nondecreasing in ``|s|`` on the outer half of the range on both sides.
    """
    lo, hi = map(float, sample_range)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError("sample_range must be a finite increasing pair")
    if n_samples < 3:
        raise ValueError("n_samples must be at least 3")
    s = np.linspace(lo, hi, n_samples)
    b1 = beta_eval(spec, s, 1)
    b2 = beta_eval(spec, s, 2)
    b3 = beta_eval(spec, s, 3)

    zero = beta_eval(spec, 0.0, 0) == 0.0 and beta_eval(spec, 0.0, 2) == 0.0

    superlinear = True
    for sign, end in ((1.0, hi), (-1.0, lo)):
        if sign * end <= 0:
            continue
        r = np.sort(sign * s[sign * s > 0.5 * sign * end])
        if r.size < 2:
            continue
        ratio = beta_eval(spec, sign * r, 1) / r
        if not (np.all(np.diff(ratio) >= -1e-12 * np.abs(ratio[1:])) and ratio[-1] > ratio[0]):
            superlinear = False

    c_beta = float(np.max(np.abs(b2) / (np.abs(b1) + 1.0)))
    return ValidationReport(
        zero_at_origin=bool(zero),
        beta3_nonnegative=bool(np.min(b3) >= 0.0),
        superlinear=superlinear,
        c_beta=c_beta,
        min_beta3=float(np.min(b3)),
        diagnostic=spec.diagnostic,
    )
