"""Neumann-Laplacian eigenbasis on an interval or rectangle.

Fields are stored as coefficient arrays against the L2-orthonormal basis

    e_0 = 1/sqrt(L),   e_k(x) = sqrt(2/L) cos(k pi x / L),  k >= 1,

(tensor products in 2D). Grid values live on the cell-centred points
``x_j = (j + 1/2) L / G`` where the orthonormal DCT-II is exactly the
basis projection, so transforms are exact for band-limited fields.

Dealiasing
----------
A polynomial nonlinearity of degree ``p`` applied to a field with ``n``
modes per axis produces modes up to ``p (n-1)``. On ``G`` cell-centred
points mode ``m`` aliases onto ``2G - m``, so the projection back onto the
first ``n`` modes is exact when ``G > (p (n-1) + n - 1) / 2``. The chemical
potential needs the degree ``2p - 1`` product ``beta'(phi) w``, which
pushes the requirement to ``G > p (n-1)``; that is the default padding.
"""
from __future__ import annotations

from math import pi, prod, sqrt

import numpy as np
import scipy.fft

from ch6relax.exceptions import NumericalOverflowError


def _tuple(value, dim, name):
    if np.isscalar(value):
        value = (value,) * dim
    value = tuple(value)
    if len(value) != dim:
        raise ValueError(f"{name} must have {dim} entries, got {len(value)}")
    return value


def dealiased_grid_size(modes: int, degree: int = 3) -> int:
    """Smallest per-axis grid making degree-(2*degree - 1) products exact."""
    return degree * (modes - 1) + 1


class Domain:
    """Box ``[0, L1] (x [0, L2])`` with a truncated cosine eigenbasis.

    Parameters
    ----------
    lengths : float or sequence of float
        Side lengths; the dimension is inferred from the sequence length.
    modes : int or sequence of int
        Retained modes per axis (>= 2).
    grid : int or sequence of int, optional
        Collocation points per axis for pointwise nonlinearities. Defaults to
        :func:`dealiased_grid_size` of ``modes`` when ``dealias`` is on and
        to ``modes`` otherwise.
    dealias : bool
        Whether the default grid is padded.
    degree : int
        Polynomial degree used to size the default padded grid.
    """

    def __init__(self, lengths, modes, grid=None, dealias=True, degree=3):
        lengths = (lengths,) if np.isscalar(lengths) else tuple(lengths)
        dim = len(lengths)
        if dim not in (1, 2):
            raise ValueError(f"only 1D and 2D boxes are supported, got dim={dim}")
        modes = _tuple(modes, dim, "modes")
        if grid is None:
            grid = tuple(dealiased_grid_size(m, degree) if dealias else m for m in modes)
        grid = _tuple(grid, dim, "grid")
        if any(not (L > 0 and np.isfinite(L)) for L in lengths):
            raise ValueError("lengths must be positive and finite")
        if any(int(m) != m or m < 2 for m in modes):
            raise ValueError("modes must be integers >= 2")
        if any(int(g) != g or g < m for g, m in zip(grid, modes)):
            raise ValueError("grid must be integers >= modes")
        self.dim = dim
        self.lengths = tuple(float(L) for L in lengths)
        self.modes = tuple(int(m) for m in modes)
        self.grid = tuple(int(g) for g in grid)
        self.dealias = bool(dealias)
        self.volume = prod(self.lengths)
        # coefficient = dct_ortho(values) * scale
        self._scale = prod(sqrt(L / G) for L, G in zip(self.lengths, self.grid))

        wavenumbers = [(np.arange(m) * pi / L) ** 2 for m, L in zip(self.modes, self.lengths)]
        if dim == 1:
            self.eigenvalues = wavenumbers[0]
        else:
            self.eigenvalues = wavenumbers[0][:, None] + wavenumbers[1][None, :]
        self.eigenvalues.setflags(write=False)

    def __repr__(self):
        return (f"Domain(lengths={self.lengths}, modes={self.modes}, "
                f"grid={self.grid}, dealias={self.dealias})")

    def __eq__(self, other):
        return (isinstance(other, Domain) and self.lengths == other.lengths
                and self.modes == other.modes and self.grid == other.grid)

    def __hash__(self):
        return hash((self.lengths, self.modes, self.grid))

    @property
    def shape(self):
        return self.modes

    def zeros(self):
        return np.zeros(self.modes)

    def constant(self, value):
        """Coefficients of the constant function ``value``."""
        c = self.zeros()
        c[(0,) * self.dim] = value * sqrt(self.volume)
        return c

    def mode(self, k, amplitude=1.0):
        """``amplitude * e_k`` as a coefficient array."""
        k = _tuple(k, self.dim, "k")
        self._check_index(k)
        c = self.zeros()
        c[k] = amplitude
        return c

    def cosine(self, wavenumbers, amplitude=1.0):
        """Coefficients of ``amplitude * prod_i cos(q_i x_i)``.

        Each ``q_i`` must be a multiple of ``pi / L_i`` inside the mode range.
        """
        wavenumbers = _tuple(wavenumbers, self.dim, "wavenumbers")
        k, norm = [], 1.0
        for q, L in zip(wavenumbers, self.lengths):
            j = q * L / pi
            if abs(j - round(j)) > 1e-9:
                raise ValueError(f"cos({q} x) is not a Neumann eigenfunction on length {L}")
            j = int(round(j))
            k.append(j)
            norm *= sqrt(L) if j == 0 else sqrt(L / 2)
        return self.mode(tuple(k), amplitude * norm)

    def _check_index(self, k):
        if any(j < 0 or j >= m for j, m in zip(k, self.modes)):
            raise IndexError(f"mode index {k} outside range {self.modes}")

    def eigenpair(self, k):
        """Eigenvalue and eigenfunction ``e_k`` for the multi-index ``k``."""
        k = _tuple(k, self.dim, "k")
        self._check_index(k)
        lam = float(self.eigenvalues[k])

        def efun(*x):
            out = 1.0
            for j, L, xi in zip(k, self.lengths, x):
                xi = np.asarray(xi, dtype=float)
                out = out * (np.full_like(xi, 1 / sqrt(L)) if j == 0
                             else sqrt(2 / L) * np.cos(j * pi * xi / L))
            return out

        return lam, efun

    def points(self):
        """Collocation coordinates, one array per axis (``ij`` meshgrid)."""
        axes = [(np.arange(G) + 0.5) * L / G for G, L in zip(self.grid, self.lengths)]
        return np.meshgrid(*axes, indexing="ij")

    def _check(self, array, shape, what):
        if array.shape != shape:
            raise ValueError(f"{what} shape {array.shape} does not match {shape}")

    def forward(self, values):
        """Grid values -> coefficients (truncated to the retained modes)."""
        values = np.asarray(values, dtype=float)
        self._check(values, self.grid, "grid field")
        c = scipy.fft.dctn(values, type=2, norm="ortho")
        return c[tuple(slice(0, m) for m in self.modes)] * self._scale

    def inverse(self, coeffs):
        """Coefficients -> values on the (padded) collocation grid."""
        coeffs = np.asarray(coeffs, dtype=float)
        self._check(coeffs, self.modes, "coefficient array")
        padded = np.zeros(self.grid)
        padded[tuple(slice(0, m) for m in self.modes)] = coeffs / self._scale
        return scipy.fft.idctn(padded, type=2, norm="ortho")

    def integrate(self, values):
        """Midpoint-rule integral of grid values over the box."""
        return float(np.mean(values)) * self.volume

    def project(self, coeffs, n):
        """Orthogonal projection onto the first ``n`` modes per axis."""
        n = _tuple(n, self.dim, "n")
        if any(j < 1 or j > m for j, m in zip(n, self.modes)):
            raise ValueError(f"projection size {n} outside 1..{self.modes}")
        out = np.array(coeffs, dtype=float, copy=True)
        for axis, j in enumerate(n):
            index = [slice(None)] * self.dim
            index[axis] = slice(j, None)
            out[tuple(index)] = 0.0
        return out

    def laplacian(self, coeffs):
        return -self.eigenvalues * coeffs

    def mean(self, coeffs):
        """Generalized mean value ``<v, 1> / |Omega|``."""
        return float(np.asarray(coeffs)[(0,) * self.dim]) / sqrt(self.volume)

    def nonlinear_apply(self, coeffs, fn, t=None):
        """Pseudo-spectral ``P[fn(v)]``: pointwise ``fn`` on the padded grid."""
        with np.errstate(over="ignore", invalid="ignore"):
            values = fn(self.inverse(coeffs))
        if not np.all(np.isfinite(values)):
            raise NumericalOverflowError("non-finite values in pointwise nonlinearity", t)
        return self.forward(values)
