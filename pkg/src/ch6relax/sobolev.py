"""Inverse Neumann operator, dual Sobolev norms and the free energy.

All norms are diagonal in the orthonormal eigenbasis. With ``l_k`` the
Neumann eigenvalues and ``v_k`` the coefficients:

=======  ==============================================
H        sum v_k^2
V        sum (1 + l_k) v_k^2
V*       sum_{k>0} v_k^2 / l_k + v_0^2 / |Omega|
W        sum (1 + l_k^2) v_k^2
W*       sum v_k^2 / (1 + l_k^2)
Z        sum (1 + l_k^2)^2 v_k^2
Z*       sum v_k^2 / (1 + l_k^2)^2
=======  ==============================================

(each entry is the squared norm). The V* norm is
``|grad N(v - mean v)|^2 + |mean v|^2``, the W and Z norms are the graph
norms ``|v|^2 + |Lap v|^2`` and ``|v|_W^2 + |Lap v|_W^2``, and W*, Z* are
their duals with respect to the L2 pairing.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ch6relax.exceptions import NumericalOverflowError
from ch6relax.potential import F_eval, PotentialSpec, f_eval
from ch6relax.spectral import Domain


class NormKind(str, enum.Enum):
    H = "H"
    V = "V"
    Vstar = "Vstar"
    W = "W"
    Wstar = "Wstar"
    Z = "Z"
    Zstar = "Zstar"


def _nonzero(domain: Domain):
    return domain.eigenvalues > 0


def inv_neumann(domain: Domain, zeta):
    """``N(zeta - mean zeta)``: zero-mean solution of ``-Lap z = zeta - mean``."""
    zeta = np.asarray(zeta, dtype=float)
    lam = domain.eigenvalues
    mask = _nonzero(domain)
    out = np.zeros_like(zeta)
    out[mask] = zeta[mask] / lam[mask]
    return out


def norm_weights(domain: Domain, kind) -> np.ndarray:
    """Per-coefficient weights ``w_k`` with ``|v|^2 = sum w_k v_k^2``."""
    kind = NormKind(kind)
    lam = domain.eigenvalues
    graph = 1.0 + lam**2
    if kind is NormKind.H:
        return np.ones_like(lam)
    if kind is NormKind.V:
        return 1.0 + lam
    if kind is NormKind.Vstar:
        w = np.zeros_like(lam)
        mask = _nonzero(domain)
        w[mask] = 1.0 / lam[mask]
        w[~mask] = 1.0 / domain.volume
        return w
    if kind is NormKind.W:
        return graph
    if kind is NormKind.Wstar:
        return 1.0 / graph
    if kind is NormKind.Z:
        return graph**2
    return 1.0 / graph**2


def norm(domain: Domain, v, kind) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.sum(norm_weights(domain, kind) * v * v)))


def norms(domain: Domain, vs, kind) -> np.ndarray:
    """Norms of a stack of fields (leading axis indexes the fields)."""
    vs = np.asarray(vs, dtype=float)
    w = norm_weights(domain, kind)
    axes = tuple(range(1, vs.ndim))
    return np.sqrt(np.sum(w * vs * vs, axis=axes))


def pairing(zeta, v) -> float:
    """Duality pairing, i.e. the L2 inner product extended to coefficients."""
    return float(np.sum(np.asarray(zeta) * np.asarray(v)))


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    willmore_part: float
    gl_part: float
    nu: float


def energy(domain: Domain, phi, spec: PotentialSpec, t=None) -> EnergyBreakdown:
    """Free energy ``1/2 |−Lap phi + f(phi)|^2 + nu (1/2 |grad phi|^2 + int F(phi))``.

    The squared residual and ``F(phi)`` are integrated on the padded grid,
    the Dirichlet term exactly in coefficient space.
    """
    phi = np.asarray(phi, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        values = domain.inverse(phi)
        residual = domain.inverse(domain.eigenvalues * phi) + f_eval(spec, values)
        willmore = 0.5 * domain.integrate(residual**2)
        gl = 0.5 * float(np.sum(domain.eigenvalues * phi * phi)) + domain.integrate(F_eval(spec, values))
    if not (np.isfinite(willmore) and np.isfinite(gl)):
        raise NumericalOverflowError("energy is not finite", t)
    return EnergyBreakdown(willmore + spec.nu * gl, willmore, gl, spec.nu)


def compactness_constant(domain: Domain, delta: float) -> float:
    """Constant C with ``|v|_V <= delta |Lap v| + C |v|_*`` on the retained modes.

    Squaring the right-hand side and dropping the cross term shows that
    ``C^2 = max(|Omega|, max_k l_k (1 + l_k - delta^2 l_k^2))`` suffices.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    lam = domain.eigenvalues[_nonzero(domain)]
    bound = max(domain.volume, float(np.max(lam * (1.0 + lam - delta**2 * lam**2))))
    return float(np.sqrt(bound))


def compactness_check(domain: Domain, v, delta: float):
    """Both sides of ``|v|_V <= delta |Lap v| + C_delta |v|_*`` and the constant."""
    c = compactness_constant(domain, delta)
    lhs = norm(domain, v, NormKind.V)
    rhs = delta * norm(domain, domain.laplacian(v), NormKind.H) + c * norm(domain, v, NormKind.Vstar)
    return lhs, rhs, c
