"""First- and second-order expansion terms around the shear profile.

Builds the Burnett fields and the viscosity, the dictionary basis
{sqrt_mu, v1 sqrt_mu, A11_hat, phi13}, the fields f1 and f2, the sources h1,
h2, h, the wall Maxwellian data with its Taylor-gap diagnostics, and the
linearized coupling operators acting through precomputed Gamma matrices.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

from .collision import CollisionOperator, GammaDictionary, _cache_read, _cache_write
from .errors import ConfigurationError
from .rayleigh import RayleighProfile, eval_derivatives, eval_u1
from .velocity import VelocityGrid, project_P

__all__ = [
    "BurnettFields",
    "KappaReport",
    "WallData",
    "compute_kappa",
    "build_burnett",
    "dictionary_basis",
    "build_f1",
    "build_f2",
    "f2_cross_check",
    "build_gamma_pairs",
    "build_sources",
    "build_wall_data",
    "f_coefficients",
    "f_coefficients_dt",
    "apply_Ltilde",
    "apply_Ltilde_t",
]

C_MU = math.sqrt(2.0 * math.pi)

# unique symmetric index pairs of the traceless tensor fields
_IJ = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]

# lexicographic pair index over the 4-element dictionary, a <= b
_PAIR = {}
for _a in range(4):
    for _b in range(_a, 4):
        _PAIR[(_a, _b)] = len(_PAIR)


def _pair(a: int, b: int) -> int:
    return _PAIR[(min(a, b), max(a, b))]


def _a_hat(grid: VelocityGrid, i: int, j: int) -> np.ndarray:
    f = grid.v[:, i] * grid.v[:, j]
    if i == j:
        f = f - grid.vsq / 3.0
    return f * grid.sqrt_mu


@dataclass(frozen=True)
class KappaReport:
    """Viscosity in both pairing conventions plus tensor-structure diagnostics."""

    kappa: float            # <A12_hat, Linv A12_hat>, drives the profile
    kappa_direct: float     # single-constant fit of <A_ij, L A_kl>
    tensor_residual: float  # relative Frobenius misfit of the isotropic pattern
    offdiag_ratio: float    # largest off-pattern pairing over the diagonal one


@dataclass(frozen=True)
class BurnettFields:
    grid: VelocityGrid
    A_hat: np.ndarray       # (6, N) fields for the index pairs _IJ
    phi13: np.ndarray       # Linv(v1 v3 sqrt_mu)
    kappa: float
    report: KappaReport


def compute_kappa(op: CollisionOperator) -> KappaReport:
    """Viscosity and the isotropic-tensor check of the Burnett pairings."""
    grid = op.grid
    A = np.stack([_a_hat(grid, i, j) for (i, j) in _IJ])
    LA = op.apply_L(A)
    T = grid.weight * (A @ LA.T)
    pat = np.empty((6, 6))
    for r, (i, j) in enumerate(_IJ):
        for c, (k, l) in enumerate(_IJ):
            pat[r, c] = (
                (i == k) * (j == l) + (i == l) * (j == k)
                - (2.0 / 3.0) * (i == j) * (k == l)
            )
    kappa_direct = float(np.sum(T * pat) / np.sum(pat * pat))
    tensor_residual = float(
        np.linalg.norm(T - kappa_direct * pat) / np.linalg.norm(T)
    )
    diag = T[_IJ.index((0, 1)), _IJ.index((0, 1))]
    off = np.abs(T[np.abs(pat) < 1e-14])
    offdiag_ratio = float(np.max(off) / diag) if off.size else 0.0
    a12 = _a_hat(grid, 0, 1)
    kappa = float(grid.inner(a12, op.solve_Linv(a12)))
    return KappaReport(kappa=kappa, kappa_direct=kappa_direct,
                       tensor_residual=tensor_residual,
                       offdiag_ratio=offdiag_ratio)


def build_burnett(op: CollisionOperator) -> BurnettFields:
    grid = op.grid
    report = compute_kappa(op)
    A = np.stack([_a_hat(grid, i, j) for (i, j) in _IJ])
    phi13 = op.solve_Linv(_a_hat(grid, 0, 2))
    return BurnettFields(grid=grid, A_hat=A, phi13=phi13,
                         kappa=report.kappa, report=report)


def dictionary_basis(b: BurnettFields) -> np.ndarray:
    """The 4-field dictionary carrying f1, f2 and the sources."""
    g = b.grid
    return np.stack([
        g.sqrt_mu,
        g.v1 * g.sqrt_mu,
        b.A_hat[_IJ.index((0, 0))],
        b.phi13,
    ])


# -- expansion fields --------------------------------------------------------


def build_f1(profile: RayleighProfile, grid: VelocityGrid, t: float,
             x3: np.ndarray) -> np.ndarray:
    """f1(t, x3, v) = u1(t, x3) v1 sqrt_mu."""
    u1 = np.atleast_1d(eval_u1(profile, t, x3))
    return u1[:, None] * (grid.v1 * grid.sqrt_mu)[None, :]


def _f2_coeffs(profile: RayleighProfile, t: float, x3: np.ndarray):
    """Dictionary coefficients (c0, c2, c3) of f2."""
    u1 = np.atleast_1d(eval_u1(profile, t, x3))
    _, du3, _, _, _ = eval_derivatives(profile, t, np.atleast_1d(x3))
    return u1 * u1 / 3.0, u1 * u1 / 2.0, -np.atleast_1d(du3)


def build_f2(profile: RayleighProfile, burnett: BurnettFields, t: float,
             x3: np.ndarray) -> np.ndarray:
    """f2 = (u1^2/3) sqrt_mu + (u1^2/2) A11_hat - (d3 u1) phi13."""
    g = burnett.grid
    c0, c2, c3 = _f2_coeffs(profile, t, x3)
    e0 = g.sqrt_mu
    e2 = burnett.A_hat[_IJ.index((0, 0))]
    return c0[:, None] * e0 + c2[:, None] * e2 + c3[:, None] * burnett.phi13


def f2_cross_check(profile: RayleighProfile, burnett: BurnettFields,
                   op: CollisionOperator, t: float, x3: np.ndarray) -> float:
    """Relative gap between the two constructions of the microscopic part of
    f2: the dictionary form versus -Linv(v.grad f1) + (I-P)(f1^2 / 2 sqrt_mu)."""
    g = burnett.grid
    f2 = build_f2(profile, burnett, t, x3)
    Pf2, _ = project_P(g, f2)
    micro_built = f2 - Pf2
    u1 = np.atleast_1d(eval_u1(profile, t, x3))
    _, du3, _, _, _ = eval_derivatives(profile, t, np.atleast_1d(x3))
    grad_term = np.atleast_1d(du3)[:, None] * _a_hat(g, 0, 2)[None, :]
    quad = (0.5 * u1 * u1)[:, None] * (g.v1 * g.v1 * g.sqrt_mu)[None, :]
    Pquad, _ = project_P(g, quad)
    micro_direct = -op.solve_Linv(grad_term) + (quad - Pquad)
    num = g.norm_l2(micro_built - micro_direct)
    den = g.norm_l2(micro_built)
    return float(np.max(num) / max(np.max(den), 1e-300))


# -- Gamma pair fields and sources -------------------------------------------


def build_gamma_pairs(op: CollisionOperator, burnett: BurnettFields) -> np.ndarray:
    """All Gamma(e_a, e_b), a <= b, over the dictionary basis; disk cached."""
    basis = dictionary_basis(burnett)
    gr = op.grid
    digest = hashlib.sha256(np.ascontiguousarray(basis).tobytes()).hexdigest()[:16]
    hdr = {
        "kind": "gamma_pairs",
        "backend": "hardsphere",
        "n_per_axis": gr.n_per_axis,
        "v_max": gr.v_max,
        "angular_order": op.angular_order,
        "basis_sha": digest,
    }
    name = (
        f"gpairs_n{gr.n_per_axis}_vmax{gr.v_max:g}_ao{op.angular_order}"
        f"_{digest}.bin"
    )
    path = os.path.join(op.cache_dir, name)
    if os.path.exists(path):
        return _cache_read(path, hdr)
    pairs = op.apply_Gamma_pairs(basis)
    try:
        _cache_write(path, hdr, pairs)
    except OSError:
        pass
    return pairs


def build_sources(profile: RayleighProfile, burnett: BurnettFields, t: float,
                  x3: np.ndarray, eps: float, pairs: np.ndarray | None = None):
    """Sources (h1, h2, h) over (x3, v).

    h1 = -dt f1 - v3 d3 f2 + 2 Gamma(f1, f2); h2 = -dt f2 + Gamma(f2, f2);
    h = eps^{-1/2} h1 + eps^{1/2} h2. With pairs=None (BGK surrogate mode) the
    Gamma terms are omitted; callers must record that choice.
    """
    g = burnett.grid
    x3 = np.atleast_1d(np.asarray(x3, dtype=np.float64))
    u1 = np.atleast_1d(eval_u1(profile, t, x3))
    dut, du3, du33, dut3, _ = (np.atleast_1d(a) for a in
                               eval_derivatives(profile, t, x3))
    e0 = g.sqrt_mu
    e1 = g.v1 * g.sqrt_mu
    e2 = burnett.A_hat[_IJ.index((0, 0))]
    e3 = burnett.phi13
    d0 = g.v3 * e0
    d2 = g.v3 * e2
    d3 = g.v3 * e3

    h1 = (
        -dut[:, None] * e1[None, :]
        - (2.0 * u1 * du3 / 3.0)[:, None] * d0[None, :]
        - (u1 * du3)[:, None] * d2[None, :]
        + du33[:, None] * d3[None, :]
    )
    c0 = u1 * u1 / 3.0
    c2 = u1 * u1 / 2.0
    c3 = -du3
    h2 = (
        -(2.0 * u1 * dut / 3.0)[:, None] * e0[None, :]
        - (u1 * dut)[:, None] * e2[None, :]
        + dut3[:, None] * e3[None, :]
    )
    if pairs is not None:
        h1 += 2.0 * u1[:, None] * (
            c0[:, None] * pairs[_pair(0, 1)][None, :]
            + c2[:, None] * pairs[_pair(1, 2)][None, :]
            + c3[:, None] * pairs[_pair(1, 3)][None, :]
        )
        h2 += (
            (c0 * c0)[:, None] * pairs[_pair(0, 0)][None, :]
            + (2.0 * c0 * c2)[:, None] * pairs[_pair(0, 2)][None, :]
            + (2.0 * c0 * c3)[:, None] * pairs[_pair(0, 3)][None, :]
            + (c2 * c2)[:, None] * pairs[_pair(2, 2)][None, :]
            + (2.0 * c2 * c3)[:, None] * pairs[_pair(2, 3)][None, :]
            + (c3 * c3)[:, None] * pairs[_pair(3, 3)][None, :]
        )
    h = h1 / math.sqrt(eps) + math.sqrt(eps) * h2
    return h1, h2, h


# -- wall data ----------------------------------------------------------------


@dataclass(frozen=True)
class WallData:
    """Wall Maxwellian quantities at x3 = 0 for a given eps."""

    eps: float
    M_w: np.ndarray            # analytic wall Maxwellian, all nodes
    M_w_discrete: np.ndarray   # renormalized to unit discrete outgoing flux
    c_mu: float                # continuum sqrt(2 pi)
    c_mu_discrete: float       # reciprocal discrete half-flux of mu
    r: np.ndarray              # boundary datum, meaningful on v3 > 0
    I_f2: float                # discrete incoming flux of f2 sqrt_mu
    taylor_gap_1: float
    taylor_gap_2: float


def build_wall_data(profile: RayleighProfile, grid: VelocityGrid, eps: float,
                    f2_wall: np.ndarray) -> WallData:
    if not (0.0 < eps < 1.0):
        raise ConfigurationError(f"eps must lie in (0, 1), got {eps}")
    shift = eps * profile.u_b
    v = grid.v
    mu = grid.mu
    sq = grid.sqrt_mu
    Mw = (1.0 / (2.0 * math.pi)) * np.exp(
        -0.5 * ((v[:, 0] - shift) ** 2 + v[:, 1] ** 2 + v[:, 2] ** 2)
    )
    out_mask = v[:, 2] > 0
    in_mask = ~out_mask
    if shift > 0.25 * grid.v_max:
        raise ConfigurationError(
            f"wall speed eps*u_b = {shift:.3g} exceeds the grid's resolvable "
            f"range (v_max = {grid.v_max})"
        )
    flux_out = grid.weight * float(np.sum(Mw[out_mask] * v[out_mask, 2]))
    if not (0.5 < flux_out < 2.0):
        raise ConfigurationError(
            f"wall Maxwellian discrete flux {flux_out:.3g} is too far from 1; "
            "the velocity grid cannot represent the wall Maxwellian"
        )
    Mw_disc = Mw / flux_out
    half_flux = grid.weight * float(np.sum(mu[in_mask] * np.abs(v[in_mask, 2])))
    c_mu_disc = 1.0 / half_flux

    I_f2 = grid.weight * float(
        np.sum(f2_wall[in_mask] * sq[in_mask] * np.abs(v[in_mask, 2]))
    )
    # the linear Taylor term of M_w carries the c_mu factor: M_w/sqrt_mu
    # expands as sum c_mu eps^i m_i sqrt_mu with m_1 = u_b v_1
    r = (
        math.sqrt(eps) * (Mw_disc / sq) * I_f2
        - math.sqrt(eps) * f2_wall
        + (Mw_disc / c_mu_disc - mu - eps * profile.u_b * grid.v1 * mu)
        / (eps ** 1.5 * sq)
    )
    # gap diagnostics use the analytic constants: the 1e-6-level discrete
    # renormalization would otherwise swamp the O(eps^2) second gap
    q = mu ** (-0.25) / sq
    taylor_1 = float(np.max(np.abs(q * (Mw - C_MU * mu))))
    taylor_2 = float(np.max(np.abs(
        q * (Mw - C_MU * mu - C_MU * eps * profile.u_b * grid.v1 * mu)
    )))
    return WallData(eps=eps, M_w=Mw, M_w_discrete=Mw_disc, c_mu=C_MU,
                    c_mu_discrete=c_mu_disc, r=r, I_f2=I_f2,
                    taylor_gap_1=taylor_1, taylor_gap_2=taylor_2)


# -- linearized coupling -------------------------------------------------------


def f_coefficients(profile: RayleighProfile, t: float, x3, eps: float) -> np.ndarray:
    """Dictionary coefficients of f1 + eps*f2 at (t, x3)."""
    u1 = eval_u1(profile, t, x3)
    _, du3, _, _, _ = eval_derivatives(profile, t, x3)
    return np.array([eps * u1 * u1 / 3.0, u1, eps * u1 * u1 / 2.0, -eps * du3])


def f_coefficients_dt(profile: RayleighProfile, t: float, x3, eps: float) -> np.ndarray:
    """Dictionary coefficients of dt f1 + eps*dt f2 at (t, x3)."""
    u1 = eval_u1(profile, t, x3)
    dut, _, _, dut3, _ = eval_derivatives(profile, t, x3)
    return np.array([eps * 2.0 * u1 * dut / 3.0, dut, eps * u1 * dut, -eps * dut3])


def apply_Ltilde(gdict: GammaDictionary, coeffs: np.ndarray,
                 R_slice: np.ndarray) -> np.ndarray:
    """2 Gamma(f1 + eps f2, R) through the dictionary matrices."""
    return 2.0 * gdict.apply(coeffs, R_slice)


def apply_Ltilde_t(gdict: GammaDictionary, coeffs_dt: np.ndarray,
                   R_slice: np.ndarray) -> np.ndarray:
    """2 Gamma(dt f1 + eps dt f2, R) through the dictionary matrices."""
    return 2.0 * gdict.apply(coeffs_dt, R_slice)
