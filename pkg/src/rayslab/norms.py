"""Norm functionals for the slab runs: L2, weighted sup, boundary traces,
the diffuse boundary projection, the energy norm M and the sup norm N, and
the convergence error E(eps).

Spatial integrals use the slab cell measure dx; the wall surface measure is 1
(unit cross-section), so boundary norms are plain velocity quadratures with
the |v3| weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSnapshotsError
from .velocity import VelocityGrid, Weight, project_P

__all__ = [
    "NormRow",
    "NormAccumulator",
    "P_gamma",
    "discrete_c_mu",
    "norm_l2_xv",
    "norm_l2_nu_xv",
    "norm_linf_w",
    "norm_gamma",
    "l6_macroscopic",
    "energy_norms",
    "convergence_error_remainder",
    "convergence_error_direct",
    "estimate_monitor",
]

CSV_COLUMNS = [
    "t", "l2_R", "l2_IP_R_nu_cum", "gamma_1mPg_cum", "linf_w_eps12_R",
    "l6_PR", "l2_dtR", "linf_w_eps32_dtR", "q_l4_gamma", "M_norm", "N_norm",
]


def discrete_c_mu(grid: VelocityGrid) -> float:
    """Reciprocal of the discrete incoming half-flux of mu, so that P_gamma is
    an exact discrete projection; agrees with sqrt(2*pi) to quadrature error."""
    neg = grid.v3 < 0
    return 1.0 / (grid.weight * float(np.sum(grid.mu[neg] * np.abs(grid.v3[neg]))))


def P_gamma(grid: VelocityGrid, trace: np.ndarray, c_mu: float | None = None) -> np.ndarray:
    """Diffuse boundary projection c_mu sqrt_mu * (incoming flux of trace)."""
    grid.check_field(trace)
    if c_mu is None:
        c_mu = discrete_c_mu(grid)
    neg = grid.v3 < 0
    flux = grid.weight * float(
        np.sum(trace[neg] * grid.sqrt_mu[neg] * np.abs(grid.v3[neg]))
    )
    return c_mu * flux * grid.sqrt_mu


def norm_l2_xv(grid: VelocityGrid, f: np.ndarray, dx: float) -> float:
    """L2 norm over (x3, v) for a field of shape (n_x, N)."""
    return math.sqrt(dx * grid.weight * float(np.sum(f * f)))


def norm_l2_nu_xv(grid: VelocityGrid, f: np.ndarray, nu: np.ndarray, dx: float) -> float:
    return math.sqrt(dx * grid.weight * float(np.sum(nu[None, :] * f * f)))


def norm_linf_w(grid: VelocityGrid, f: np.ndarray, w: Weight) -> float:
    """sup over all (x3, v) of e^{beta |v|^2} |f|."""
    return float(np.max(np.exp(w.beta * grid.vsq)[None, :] * np.abs(np.atleast_2d(f))))


def norm_gamma(grid: VelocityGrid, trace: np.ndarray, p: int = 2,
               outgoing: bool = True) -> float:
    """Boundary norm at the wall with the |v3| measure.

    The outgoing set at x3 = 0 is v3 < 0 (particles leaving the domain into
    the wall); incoming is v3 > 0.
    """
    grid.check_field(trace)
    mask = grid.v3 < 0 if outgoing else grid.v3 > 0
    val = grid.weight * float(
        np.sum(np.abs(trace[mask]) ** p * np.abs(grid.v3[mask]))
    )
    return val ** (1.0 / p)


def l6_macroscopic(grid: VelocityGrid, f: np.ndarray, dx: float) -> float:
    """L6-in-x norm of the macroscopic part Pf, using the exact L2_v norm of
    each x-slice of Pf."""
    Pf, _ = project_P(grid, np.atleast_2d(f))
    slice_norms = grid.norm_l2(Pf)
    return float((dx * np.sum(np.atleast_1d(slice_norms) ** 6)) ** (1.0 / 6.0))


@dataclass
class NormRow:
    t: float
    l2_R: float = 0.0
    l2_IP_R_nu_cum: float = 0.0
    gamma_1mPg_cum: float = 0.0
    linf_w_eps12_R: float = 0.0
    l6_PR: float = 0.0
    l2_dtR: float = 0.0
    linf_w_eps32_dtR: float = 0.0
    q_l4_gamma: float = 0.0
    M_norm: float = 0.0
    N_norm: float = 0.0

    def as_list(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


class NormAccumulator:
    """Running norm bookkeeping for a slab run.

    Cumulative dissipation integrals are fed every step; snapshot-level norms
    are fed at the output cadence. Time-derivative norms use centered
    differences over a ring of three snapshots, so each dt row lags one
    cadence interval behind the solution rows.
    """

    def __init__(self, grid: VelocityGrid, eps: float, dx: float,
                 nu: np.ndarray, weight: Weight | None = None):
        self.grid = grid
        self.eps = eps
        self.dx = dx
        self.nu = nu
        self.weight = weight if weight is not None else Weight(0.125)
        self.c_mu = discrete_c_mu(grid)
        self.diss_micro = 0.0       # int ||(I-P)R||^2_{L2_{x,nu}} dt
        self.diss_gamma = 0.0       # int |(1-P_gamma)R|^2_{gamma+} dt
        self.diss_micro_dt = 0.0
        self.diss_gamma_dt = 0.0
        self.sup_l2 = 0.0
        self.sup_l2_dt = 0.0
        self.sup_linf_w = 0.0
        self.sup_linf_w_dt = 0.0
        self.sup_conv = 0.0         # sup_t of the convergence-error integrand
        self._ring: list = []       # [(t, R)] for centered differencing
        self.rows: list = []

    # -- per-step feeds -------------------------------------------------------

    def add_dissipation(self, R: np.ndarray, dt: float):
        g = self.grid
        PR, _ = project_P(g, R)
        micro = R - PR
        self.diss_micro += dt * (norm_l2_nu_xv(g, micro, self.nu, self.dx) ** 2)
        trace = R[0]
        dg = trace - P_gamma(g, trace, self.c_mu)
        self.diss_gamma += dt * (norm_gamma(g, dg, p=2, outgoing=True) ** 2)

    # -- per-snapshot feeds ---------------------------------------------------

    def add_snapshot(self, t: float, R: np.ndarray, q_trace: np.ndarray | None,
                     conv_err: float):
        g = self.grid
        eps = self.eps
        row = NormRow(t=t)
        row.l2_R = norm_l2_xv(g, R, self.dx)
        row.linf_w_eps12_R = math.sqrt(eps) * norm_linf_w(g, R, self.weight)
        row.l6_PR = l6_macroscopic(g, R, self.dx)
        if q_trace is not None:
            row.q_l4_gamma = norm_gamma(g, q_trace, p=4, outgoing=False)
        self.sup_l2 = max(self.sup_l2, row.l2_R)
        self.sup_linf_w = max(self.sup_linf_w, row.linf_w_eps12_R / math.sqrt(eps))
        self.sup_conv = max(self.sup_conv, conv_err)

        self._ring.append((t, np.array(R, copy=True)))
        if len(self._ring) > 3:
            self._ring.pop(0)
        if len(self._ring) == 3:
            (t0, r0), (t1, r1), (t2, r2) = self._ring
            dtR = (r2 - r0) / (t2 - t0)
            span = t2 - t0
            row.l2_dtR = norm_l2_xv(g, dtR, self.dx)
            row.linf_w_eps32_dtR = eps ** 1.5 * norm_linf_w(g, dtR, self.weight)
            PdtR, _ = project_P(g, dtR)
            self.diss_micro_dt += 0.5 * span * (
                norm_l2_nu_xv(g, dtR - PdtR, self.nu, self.dx) ** 2
            )
            dgt = dtR[0] - P_gamma(g, dtR[0], self.c_mu)
            self.diss_gamma_dt += 0.5 * span * (
                norm_gamma(g, dgt, p=2, outgoing=True) ** 2
            )
            self.sup_l2_dt = max(self.sup_l2_dt, row.l2_dtR)
            self.sup_linf_w_dt = max(
                self.sup_linf_w_dt, row.linf_w_eps32_dtR / eps ** 1.5
            )
        row.l2_IP_R_nu_cum = math.sqrt(self.diss_micro) / eps
        row.gamma_1mPg_cum = math.sqrt(self.diss_gamma) / math.sqrt(eps)
        row.M_norm, row.N_norm = self.current_energy_norms()
        self.rows.append(row)

    # -- aggregates -----------------------------------------------------------

    def current_energy_norms(self):
        eps = self.eps
        M = (
            math.sqrt(self.diss_micro) / eps
            + math.sqrt(self.diss_gamma) / math.sqrt(eps)
            + self.sup_l2
            + math.sqrt(self.diss_micro_dt) / eps
            + math.sqrt(self.diss_gamma_dt) / math.sqrt(eps)
            + self.sup_l2_dt
        )
        N = math.sqrt(eps) * self.sup_linf_w + eps ** 1.5 * self.sup_linf_w_dt
        return M, N


def energy_norms(acc: NormAccumulator):
    """Final (M, N) of a completed run; needs at least three snapshots for the
    time-derivative constituents."""
    if len(acc._ring) < 3:
        raise InsufficientSnapshotsError(
            "energy norms need at least 3 snapshots for dt differencing"
        )
    return acc.current_energy_norms()


def convergence_error_remainder(grid: VelocityGrid, f2: np.ndarray, R: np.ndarray,
                                eps: float, dx: float) -> float:
    """||eps f2 + eps^{1/2} R||_{L2_{x,v}}, the exact reconstruction of the
    convergence-error integrand in remainder mode."""
    return norm_l2_xv(grid, eps * f2 + math.sqrt(eps) * R, dx)


def convergence_error_direct(grid: VelocityGrid, F: np.ndarray, f1: np.ndarray,
                             eps: float, dx: float) -> float:
    """||(F - mu)/(eps sqrt_mu) - f1||_{L2_{x,v}} for a direct-mode state F."""
    dev = (F - grid.mu[None, :]) / (eps * grid.sqrt_mu[None, :]) - f1
    return norm_l2_xv(grid, dev, dx)


def estimate_monitor(rows: list, taylor_gap_1: float = float("nan"),
                     taylor_gap_2: float = float("nan"),
                     eps: float = float("nan")) -> dict:
    """Inequality-ratio ledger of a completed run; finiteness is the claim."""
    out = {}
    if not rows:
        return out

    def ratio(name, lhs, rhs):
        if lhs == 0.0 and rhs == 0.0:
            out[name] = {"lhs": lhs, "rhs": rhs, "ratio": "vacuous"}
        else:
            out[name] = {"lhs": lhs, "rhs": rhs,
                         "ratio": lhs / rhs if rhs != 0.0 else float("inf")}

    last = rows[-1]
    # L6 control of the macroscopic part by the dissipation terms
    sup_l6 = max(r.l6_PR for r in rows)
    ratio("l6_by_dissipation", sup_l6,
          last.l2_IP_R_nu_cum + last.gamma_1mPg_cum + last.q_l4_gamma
          + max(r.l2_R for r in rows))
    ratio("energy_M_vs_sup_l2", max(r.l2_R for r in rows), last.M_norm)
    ratio("N_vs_M", last.N_norm, last.M_norm)
    if np.isfinite(taylor_gap_1):
        ratio("taylor_gap_1_over_eps", taylor_gap_1, eps)
        ratio("taylor_gap_2_over_eps2", taylor_gap_2, eps * eps)
    return out
