"""Linearized collision operator L = nu - K (hard sphere) and BGK surrogate.

Provides the constrained inverse on the microscopic subspace, cached implicit
factorizations for stiff time stepping, the projected spectral gap, and the
bilinear term Gamma with its precomputed dictionary matrices.
"""

from __future__ import annotations

import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, eigsh

from . import _kernels
from .errors import (
    BackendUnsupportedError,
    CacheIntegrityError,
    ConfigurationError,
    MemoryBudgetError,
    NotMicroscopicError,
)
from .velocity import VelocityGrid, project_P

__all__ = [
    "CollisionOperator",
    "GammaDictionary",
    "build_angular_rule",
    "nu_hard_sphere",
    "assemble_K",
    "default_cache_dir",
]

CACHE_FORMAT = 1
DEFAULT_BYTE_BUDGET = 2_500_000_000


def default_cache_dir() -> str:
    env = os.environ.get("RAYSLAB_CACHE_DIR")
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "rayslab")


def build_angular_rule(order: int):
    """Half-sphere product quadrature for the gain term.

    Gauss-Legendre in c = omega_3 on [0, 1] crossed with a uniform midpoint
    rule in the azimuth; weights sum to 2*pi (half-sphere area), so the
    quadrature of |z.omega| approximates pi*|z|.
    """
    if order < 8:
        raise ConfigurationError(f"angular_order must be >= 8, got {order}")
    m_c = max(2, order // 2)
    m_phi = order
    x, wx = np.polynomial.legendre.leggauss(m_c)
    c = 0.5 * (x + 1.0)
    wc = 0.5 * wx
    phi = 2.0 * np.pi * (np.arange(m_phi) + 0.5) / m_phi
    wphi = 2.0 * np.pi / m_phi
    s = np.sqrt(1.0 - c**2)
    om = np.empty((m_c * m_phi, 3))
    omw = np.empty(m_c * m_phi)
    k = 0
    for a in range(m_c):
        for b in range(m_phi):
            om[k, 0] = s[a] * np.cos(phi[b])
            om[k, 1] = s[a] * np.sin(phi[b])
            om[k, 2] = c[a]
            omw[k] = wc[a] * wphi
            k += 1
    om.setflags(write=False)
    omw.setflags(write=False)
    return om, omw


def nu_hard_sphere(grid: VelocityGrid) -> np.ndarray:
    """Collision frequency nu(v) = pi * int |v-u| mu(u) du by grid quadrature."""
    return _kernels.nu_hs_kernel(grid.v, grid.weight)


def _enforce_nullspace(K: np.ndarray, grid: VelocityGrid, nu: np.ndarray) -> None:
    """Symmetric low-rank correction so that K chi = nu chi for the five
    collision invariants, in place.

    With Pi the orthogonal projection onto the invariant span, replaces K by
    (I-Pi) K (I-Pi) plus the symmetric operator matching the target action
    nu*chi on the span; the update is rank <= 10 and applied in row blocks to
    bound peak memory.
    """
    w = grid.weight
    X = np.ascontiguousarray(grid.kernel_basis_on)
    V = nu[:, None] * X
    B = w * (X.T @ K)                       # 5 x N
    E = w * (B @ X)                         # 5 x 5, symmetric
    F5 = w * (X.T @ V)                      # 5 x 5, symmetric
    # Delta K = X @ G + G.T @ X.T
    G = -B + w * V.T + (0.5 * (E - w * F5)) @ X.T
    N = K.shape[0]
    block = max(1, min(N, 64 * 1024 * 1024 // (8 * N)))
    for lo in range(0, N, block):
        hi = min(lo + block, N)
        K[lo:hi] += X[lo:hi] @ G
        K[lo:hi] += G[:, lo:hi].T @ X.T


def assemble_K(grid: VelocityGrid, byte_budget: int = DEFAULT_BYTE_BUDGET) -> np.ndarray:
    """Dense symmetric K with the null-space identity K chi = nu chi enforced."""
    need = 8 * grid.size * grid.size
    if need > byte_budget:
        raise MemoryBudgetError(
            f"dense K needs {need} bytes, budget is {byte_budget}"
        )
    K = _kernels.assemble_K_kernel(grid.v, grid.vsq, grid.h)
    nu = nu_hard_sphere(grid)
    _enforce_nullspace(K, grid, nu)
    # symmetrize away the round-off asymmetry of the blockwise update
    K += K.T
    K *= 0.5
    return K


# -- disk cache -------------------------------------------------------------


def _cache_write(path: str, header: dict, payload: np.ndarray) -> None:
    raw = np.ascontiguousarray(payload, dtype=np.float64).tobytes()
    header = dict(header)
    header["format"] = CACHE_FORMAT
    header["shape"] = list(payload.shape)
    header["sha256"] = hashlib.sha256(raw).hexdigest()
    os.makedirs(os.path.dirname(path), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(raw)
    os.replace(tmp, path)


def _cache_read(path: str, expect: dict) -> np.ndarray:
    with open(path, "rb") as fh:
        line = fh.readline()
        header = json.loads(line.decode("utf-8"))
        raw = fh.read()
    if header.get("format") != CACHE_FORMAT:
        raise CacheIntegrityError(f"{path}: unsupported format {header.get('format')}")
    for k, val in expect.items():
        if header.get(k) != val:
            raise CacheIntegrityError(f"{path}: header field {k!r} mismatch")
    if hashlib.sha256(raw).hexdigest() != header["sha256"]:
        raise CacheIntegrityError(f"{path}: payload hash mismatch")
    arr = np.frombuffer(raw, dtype=np.float64).reshape(header["shape"])
    return arr.copy()


# -- dictionary -------------------------------------------------------------


@dataclass
class GammaDictionary:
    """Precomputed matrices M_k with M_k @ g = Gamma(e_k, g) for a fixed basis."""

    grid: VelocityGrid
    matrices: list
    conservation_defects: list

    def apply(self, coeffs: np.ndarray, g: np.ndarray) -> np.ndarray:
        """sum_k coeffs[k] * Gamma(e_k, g)."""
        out = np.zeros_like(g)
        for c, M in zip(coeffs, self.matrices):
            if c != 0.0:
                out += c * (M @ g)
        return out


# -- operator ---------------------------------------------------------------


class CollisionOperator:
    """Backend-tagged discrete linearized collision operator.

    Hard sphere: L f = nu*f - K@f with the Grad kernels and enforced null
    space. BGK: L f = nu0*(f - Pf).
    """

    def __init__(self, grid: VelocityGrid, backend: str, *, nu0: float | None = None,
                 angular_order: int = 8, byte_budget: int = DEFAULT_BYTE_BUDGET,
                 cache_dir: str | None = None):
        if backend not in ("hardsphere", "bgk"):
            raise BackendUnsupportedError(f"unknown backend {backend!r}")
        self.grid = grid
        self.backend = backend
        self.angular_order = int(angular_order)
        self.byte_budget = int(byte_budget)
        self.cache_dir = cache_dir if cache_dir is not None else default_cache_dir()
        self._fact_cache: dict = {}
        self._linv_fact = None
        self._gap = None
        if backend == "bgk":
            if nu0 is None or nu0 <= 0:
                raise ConfigurationError("BGK backend needs nu0 > 0")
            self.nu0 = float(nu0)
            self.nu = np.full(grid.size, self.nu0)
            self.K = None
            self.om = self.omw = None
        else:
            self.nu0 = None
            self.nu = nu_hard_sphere(grid)
            self.K = self._load_or_assemble_K()
            self.om, self.omw = build_angular_rule(self.angular_order)
        self.nu.setflags(write=False)

    # -- assembly / cache ---------------------------------------------------

    def _K_header(self) -> dict:
        return {
            "kind": "K",
            "backend": "hardsphere",
            "n_per_axis": self.grid.n_per_axis,
            "v_max": self.grid.v_max,
        }

    def _load_or_assemble_K(self) -> np.ndarray:
        hdr = self._K_header()
        name = f"K_hs_n{self.grid.n_per_axis}_vmax{self.grid.v_max:g}.bin"
        path = os.path.join(self.cache_dir, name)
        if os.path.exists(path):
            return _cache_read(path, hdr)
        K = assemble_K(self.grid, self.byte_budget)
        try:
            _cache_write(path, hdr, K)
        except OSError:
            pass  # cache is best-effort; the matrix is still usable
        return K

    # -- linear operator ----------------------------------------------------

    def apply_L(self, f: np.ndarray) -> np.ndarray:
        self.grid.check_field(f)
        if self.backend == "bgk":
            Pf, _ = project_P(self.grid, f)
            return self.nu0 * (f - Pf)
        return self.nu * f - f @ self.K  # K symmetric, works for 1-D and 2-D f

    def solve_Linv(self, g: np.ndarray, tol_perp: float = 1e-8) -> np.ndarray:
        """phi with L phi = g, P phi = 0; g must be microscopic."""
        self.grid.check_field(g)
        Pg, _ = project_P(self.grid, g)
        ng = self.grid.norm_l2(g)
        if np.max(np.atleast_1d(self.grid.norm_l2(Pg))) > tol_perp * max(np.max(np.atleast_1d(ng)), 1e-300):
            raise NotMicroscopicError("solve_Linv needs P g = 0")
        gm = g - Pg
        if self.backend == "bgk":
            return gm / self.nu0
        if self._linv_fact is None:
            A = np.diag(self.nu) - self.K
            # shift the 5-dimensional kernel to make the system definite; the
            # shift acts only on the invariant span, which the rhs avoids
            X = self.grid.kernel_basis_on
            shift = float(np.mean(self.nu))
            A += (shift * self.grid.weight) * (X @ X.T)
            self._linv_fact = sla.cho_factor(A, lower=True, overwrite_a=True)
        phi = sla.cho_solve(self._linv_fact, np.atleast_2d(gm).T).T
        phi = phi.reshape(g.shape)
        Pphi, _ = project_P(self.grid, phi)
        return phi - Pphi

    def implicit_solve(self, lam: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (I + lam*L) x = rhs; factorization cached per lam."""
        self.grid.check_field(rhs)
        if self.backend == "bgk":
            Pr, _ = project_P(self.grid, rhs)
            return Pr + (rhs - Pr) / (1.0 + lam * self.nu0)
        key = float(lam)
        fact = self._fact_cache.get(key)
        if fact is None:
            A = -lam * self.K
            A[np.diag_indices_from(A)] += 1.0 + lam * self.nu
            fact = sla.cho_factor(A, lower=True, overwrite_a=True)
            self._fact_cache[key] = fact
        x = sla.cho_solve(fact, np.atleast_2d(rhs).T).T
        return x.reshape(rhs.shape)

    def spectral_gap(self, tol: float = 1e-6, maxiter: int = 5000) -> float:
        """Coercivity constant: min of <Lf,f>/<nu f,f> over f orthogonal to the
        collision invariants.

        Computed as the smallest eigenvalue of the nu-symmetrized operator via
        Lanczos iteration, with the 5-dimensional kernel deflated by a shift.
        """
        if self._gap is not None:
            return self._gap
        if self.backend == "bgk":
            # L = nu0 (I-P) and the nu-norm is nu0 times the plain norm
            self._gap = 1.0
            return self._gap
        N = self.grid.size
        K = self.K
        nu = self.nu
        s = 1.0 / np.sqrt(nu)
        # kernel basis in the symmetrized metric, re-orthonormalized; the
        # shift pushes the null space above the continuous spectrum bottom
        Z = np.linalg.qr(np.sqrt(nu)[:, None] * self.grid.kernel_basis_on)[0]
        shift = 2.0

        def mv(x):
            x = x.ravel()
            y = s * (nu * (s * x) - K @ (s * x))
            y += shift * (Z @ (Z.T @ x))
            return y

        C = LinearOperator((N, N), matvec=mv, dtype=np.float64)
        vals = eigsh(C, k=1, which="SA", return_eigenvectors=False,
                     tol=tol, maxiter=maxiter)
        self._gap = float(vals[0])
        return self._gap

    # -- bilinear term ------------------------------------------------------

    def _require_hs(self):
        if self.backend != "hardsphere":
            raise BackendUnsupportedError("Gamma is only available for the hard-sphere backend")

    def _tail_check(self, f: np.ndarray, name: str):
        g = self.grid
        n = g.n_per_axis
        idx = np.arange(g.size).reshape(n, n, n)
        shell = np.zeros((n, n, n), dtype=bool)
        shell[0, :, :] = shell[-1, :, :] = True
        shell[:, 0, :] = shell[:, -1, :] = True
        shell[:, :, 0] = shell[:, :, -1] = True
        fmax = np.max(np.abs(f))
        if fmax > 0 and np.max(np.abs(f[idx[shell]])) > 1e-8 * fmax:
            warnings.warn(
                f"{name}: tail mass at the grid boundary exceeds 1e-8 of the peak",
                RuntimeWarning,
            )

    def apply_Gamma(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        self._require_hs()
        self.grid.check_field(f)
        self.grid.check_field(g)
        self._tail_check(f, "Gamma first argument")
        if g is not f:
            self._tail_check(g, "Gamma second argument")
        gr = self.grid
        rf = np.ascontiguousarray(f / gr.sqrt_mu)
        rg = np.ascontiguousarray(g / gr.sqrt_mu)
        return _kernels.gamma_apply_kernel(
            gr.v, gr.h, gr.v_max, gr.n_per_axis, rf, rg, gr.mu, gr.sqrt_mu,
            self.om, self.omw,
        )

    def apply_Gamma_pairs(self, basis: np.ndarray) -> np.ndarray:
        """All Gamma(e_a, e_b) for a <= b over a small basis, in one sweep.

        Returns an array indexed by the lexicographic pair index; agrees with
        apply_Gamma pair by pair.
        """
        self._require_hs()
        basis = np.ascontiguousarray(np.asarray(basis, dtype=np.float64))
        self.grid.check_field(basis)
        gr = self.grid
        R = np.ascontiguousarray(basis / gr.sqrt_mu)
        return _kernels.gamma_pairs_kernel(
            gr.v, gr.h, gr.v_max, gr.n_per_axis, R, gr.mu, gr.sqrt_mu,
            self.om, self.omw,
        )

    def gamma_matrix(self, f: np.ndarray) -> np.ndarray:
        """Dense matrix M with M @ g = Gamma(f, g)."""
        self._require_hs()
        self.grid.check_field(f)
        gr = self.grid
        need = 8 * gr.size * gr.size
        if need > self.byte_budget:
            raise MemoryBudgetError(
                f"dense Gamma matrix needs {need} bytes, budget is {self.byte_budget}"
            )
        rf = np.ascontiguousarray(f / gr.sqrt_mu)
        return _kernels.gamma_matrix_kernel(
            gr.v, gr.h, gr.v_max, gr.n_per_axis, rf, gr.mu, gr.sqrt_mu,
            self.om, self.omw,
        )

    def build_gamma_dictionary(self, basis: list) -> GammaDictionary:
        """Matrices Gamma(e_k, .) for each basis field, cached to disk."""
        self._require_hs()
        gr = self.grid
        basis_arr = np.ascontiguousarray(np.asarray(basis, dtype=np.float64))
        digest = hashlib.sha256(basis_arr.tobytes()).hexdigest()[:16]
        hdr = {
            "kind": "gamma_dict",
            "backend": "hardsphere",
            "n_per_axis": gr.n_per_axis,
            "v_max": gr.v_max,
            "angular_order": self.angular_order,
            "basis_sha": digest,
        }
        name = (
            f"gdict_n{gr.n_per_axis}_vmax{gr.v_max:g}_ao{self.angular_order}"
            f"_{digest}.bin"
        )
        path = os.path.join(self.cache_dir, name)
        if os.path.exists(path):
            stack = _cache_read(path, hdr)
            mats = [np.ascontiguousarray(stack[k]) for k in range(stack.shape[0])]
        else:
            mats = [self.gamma_matrix(e) for e in basis_arr]
            try:
                _cache_write(path, hdr, np.stack(mats))
            except OSError:
                pass
        defects = []
        X = gr.kernel_basis_raw
        for M, e in zip(mats, basis_arr):
            out = M @ gr.sqrt_mu
            defects.append(float(np.max(np.abs(gr.weight * (X.T @ out)))))
        return GammaDictionary(grid=gr, matrices=mats, conservation_defects=defects)
