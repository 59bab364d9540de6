"""Discrete velocity domain: midpoint grid, quadrature, Maxwellian, projection, weight.

All velocity fields are plain 1-D numpy arrays of length ``grid.size`` (or 2-D
arrays with that trailing axis); the grid object carries the quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GridMismatchError

__all__ = [
    "VelocityGrid",
    "Moments",
    "Weight",
    "build_grid",
    "maxwellian",
    "sqrt_maxwellian",
    "project_P",
    "apply_weight",
]


@dataclass(frozen=True)
class Moments:
    """Macroscopic moments (a, b, c) of a velocity field against the kernel basis."""

    a: float
    b: np.ndarray
    c: float


@dataclass(frozen=True)
class Weight:
    """Exponential velocity weight exp(beta*|v|^2) with 0 < beta <= 1/8."""

    beta: float

    def __post_init__(self):
        if not (0.0 < self.beta <= 0.125):
            raise ConfigurationError(
                f"weight exponent beta must lie in (0, 1/8], got {self.beta}"
            )


class VelocityGrid:
    """Uniform Cartesian midpoint grid on [-v_max, v_max]^3.

    Nodes sit at cell centers, so no node has a vanishing component; the set is
    closed under v -> -v and coordinate permutations. Quadrature weight is the
    cell volume, identical for every node.
    """

    def __init__(self, n_per_axis: int, v_max: float):
        if n_per_axis < 2:
            raise ConfigurationError(f"n_per_axis must be >= 2, got {n_per_axis}")
        if v_max <= 0:
            raise ConfigurationError(f"v_max must be > 0, got {v_max}")
        self.n_per_axis = int(n_per_axis)
        self.v_max = float(v_max)
        self.h = 2.0 * self.v_max / self.n_per_axis
        axis = -self.v_max + self.h * (np.arange(self.n_per_axis) + 0.5)
        self.axis = axis
        V1, V2, V3 = np.meshgrid(axis, axis, axis, indexing="ij")
        self.v = np.column_stack([V1.ravel(), V2.ravel(), V3.ravel()])
        self.v.setflags(write=False)
        self.size = self.v.shape[0]
        self.v1 = self.v[:, 0]
        self.v2 = self.v[:, 1]
        self.v3 = self.v[:, 2]
        self.vsq = np.einsum("ij,ij->i", self.v, self.v)
        self.weight = self.h**3
        # index map realizing v -> -v on the node set
        n = self.n_per_axis
        rev = n - 1 - np.arange(n)
        idx = np.arange(self.size).reshape(n, n, n)
        self.neg_index = idx[np.ix_(rev, rev, rev)].ravel()
        self._cache: dict = {}

    # -- quadrature ---------------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        """Discrete integral over velocity space, fixed summation order."""
        return self.weight * float(np.sum(f, dtype=np.float64))

    def inner(self, f: np.ndarray, g: np.ndarray):
        """Weighted inner product <f, g> = sum_i w f_i g_i (vectorized over
        leading axes)."""
        return self.weight * (f @ g if f.ndim == 1 and g.ndim == 1 else np.tensordot(f, g, axes=([-1], [-1])))

    def norm_l2(self, f: np.ndarray):
        """L^2_v norm over the trailing velocity axis."""
        out = np.sqrt(self.weight) * np.linalg.norm(f, axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def check_field(self, f: np.ndarray):
        if f.shape[-1] != self.size:
            raise GridMismatchError(
                f"field of length {f.shape[-1]} does not match grid size {self.size}"
            )

    # -- cached constructions ----------------------------------------------

    @property
    def mu(self) -> np.ndarray:
        if "mu" not in self._cache:
            m = (2.0 * np.pi) ** (-1.5) * np.exp(-0.5 * self.vsq)
            m.setflags(write=False)
            self._cache["mu"] = m
        return self._cache["mu"]

    @property
    def sqrt_mu(self) -> np.ndarray:
        if "sqrt_mu" not in self._cache:
            s = np.sqrt(self.mu)
            s.setflags(write=False)
            self._cache["sqrt_mu"] = s
        return self._cache["sqrt_mu"]

    @property
    def kernel_basis_raw(self) -> np.ndarray:
        """Columns {sqrt_mu, v_i sqrt_mu, (|v|^2-3) sqrt_mu} spanning ker(L)."""
        if "chi_raw" not in self._cache:
            s = self.sqrt_mu
            X = np.column_stack([s, self.v1 * s, self.v2 * s, self.v3 * s, (self.vsq - 3.0) * s])
            X.setflags(write=False)
            self._cache["chi_raw"] = X
        return self._cache["chi_raw"]

    @property
    def kernel_basis_on(self) -> np.ndarray:
        """Discretely orthonormalized kernel basis (Gram solve against the raw
        collision invariants), used wherever exact idempotence is required."""
        if "chi_on" not in self._cache:
            X = self.kernel_basis_raw
            G = self.weight * (X.T @ X)
            L = np.linalg.cholesky(G)
            Xon = np.linalg.solve(L, X.T).T  # X L^{-T}
            Xon.setflags(write=False)
            self._cache["chi_on"] = Xon
        return self._cache["chi_on"]


def build_grid(n_per_axis: int, v_max: float) -> VelocityGrid:
    """Construct the midpoint velocity grid; rejects degenerate parameters."""
    return VelocityGrid(n_per_axis, v_max)


def maxwellian(grid: VelocityGrid) -> np.ndarray:
    """Global Maxwellian (2*pi)^{-3/2} exp(-|v|^2/2) at every node."""
    return grid.mu


def sqrt_maxwellian(grid: VelocityGrid) -> np.ndarray:
    return grid.sqrt_mu


def project_P(grid: VelocityGrid, f: np.ndarray):
    """Orthogonal projection of f onto the discrete span of the collision
    invariants.

    Returns (Pf, Moments). The reported moments are the plain quadrature
    integrals a = <sqrt_mu, f>, b = <v sqrt_mu, f>, c = <(|v|^2-3)/2 sqrt_mu, f>;
    the projection itself uses the Gram-orthonormalized basis so that
    P(Pf) = Pf to round-off.
    """
    grid.check_field(f)
    Xon = grid.kernel_basis_on
    coeffs = grid.weight * (f @ Xon)
    Pf = coeffs @ Xon.T
    X = grid.kernel_basis_raw
    raw = grid.weight * (f @ X)
    if f.ndim == 1:
        m = Moments(a=float(raw[0]), b=raw[1:4].copy(), c=0.5 * float(raw[4]))
    else:
        m = Moments(a=raw[..., 0], b=raw[..., 1:4], c=0.5 * raw[..., 4])
    return Pf, m


def apply_weight(grid: VelocityGrid, f: np.ndarray, w: Weight) -> np.ndarray:
    """Pointwise product exp(beta*|v|^2) * f."""
    grid.check_field(f)
    return np.exp(w.beta * grid.vsq) * f
