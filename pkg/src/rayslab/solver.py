"""Time integration in the slab x3 in [0, x_max] with full 3-D velocity.

Two families of runs:
  * remainder mode: IMEX integration of the remainder equation with explicit
    upwind transport and sources, implicit stiff relaxation through the cached
    factorization of (I + (dt/eps^2) L), and the diffuse-reflection boundary
    data assembled from the wall Maxwellian;
  * direct modes: the nonlinear kinetic equation itself, either with the BGK
    relaxation closed by a moment-conservative discrete Maxwellian, or with
    the hard-sphere operator in perturbation form for spot checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import norms as nrm
from .collision import CollisionOperator, GammaDictionary
from .errors import (
    CFLViolationError,
    ConfigurationError,
    NegativeInitialDataError,
    NumericalAbortError,
    RealizabilityError,
)
from .expansion import (
    BurnettFields,
    WallData,
    build_f1,
    build_f2,
    build_sources,
    build_wall_data,
    f_coefficients,
)
from .rayleigh import RayleighProfile, eval_u1
from .velocity import VelocityGrid, project_P

__all__ = ["SlabConfig", "SlabState", "SlabSolver", "discrete_maxwellian"]

MODES = ("remainder", "direct_bgk", "direct_hs")
LIMITERS = ("upwind", "minmod")


@dataclass(frozen=True)
class SlabConfig:
    eps: float
    n_x: int = 200
    x_max: float = 16.0
    t_final: float = 0.5
    cfl: float = 0.5
    mode: str = "remainder"
    include_Ltilde: bool = True
    include_GammaRR: bool = False
    limiter: str = "upwind"
    output_every: int = 20      # steps between norm snapshots
    positivity_tolerance: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ConfigurationError(f"eps must lie in (0, 1), got {self.eps}")
        if self.n_x < 4:
            raise ConfigurationError(f"n_x must be >= 4, got {self.n_x}")
        if self.x_max <= 0 or self.t_final < 0:
            raise ConfigurationError("x_max must be > 0 and t_final >= 0")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.limiter not in LIMITERS:
            raise ConfigurationError(f"limiter must be one of {LIMITERS}")
        if self.output_every < 1:
            raise ConfigurationError("output_every must be >= 1")


@dataclass
class SlabState:
    values: np.ndarray          # (n_x, N); R in remainder mode, F in direct modes
    t: float
    mode: str
    steps: int = 0
    min_value: float = np.inf   # direct-mode positivity tracker
    wall_flux_defect_max: float = 0.0


def discrete_maxwellian(grid: VelocityGrid, rho, m, E, tol: float = 1e-12,
                        maxiter: int = 60) -> np.ndarray:
    """Exponential-family Maxwellians matching the *discrete* moments
    (rho, m, E) exactly, one per spatial node.

    Newton iteration on the 5 natural parameters; with exact moment matching
    the BGK relaxation conserves mass, momentum and energy to round-off and
    mu is a fixed point of the relaxation.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    E = np.atleast_1d(np.asarray(E, dtype=np.float64))
    if np.any(rho <= 0):
        raise RealizabilityError("nonpositive density in moment closure")
    u = m / rho[:, None]
    T = (E / rho - np.einsum("xi,xi->x", u, u)) / 3.0
    if np.any(T <= 0):
        raise RealizabilityError("nonpositive temperature in moment closure")
    # natural parameters (a, b, c) of exp(a + b.v + c|v|^2), continuum start
    c = -0.5 / T
    b = u / T[:, None]
    a = np.log(rho / (2.0 * np.pi * T) ** 1.5) - np.einsum("xi,xi->x", u, u) / (2.0 * T)

    v = grid.v
    vsq = grid.vsq
    w = grid.weight
    phi = np.column_stack([np.ones(grid.size), v, vsq])  # (N, 5)
    target = np.column_stack([rho, m, E])                 # (n_x, 5)
    scale = np.maximum(np.abs(target), rho[:, None])
    for _ in range(maxiter):
        expo = a[:, None] + b @ v.T + c[:, None] * vsq[None, :]
        M = np.exp(expo)
        mom = w * (M @ phi)
        res = mom - target
        if np.max(np.abs(res) / scale) < tol:
            break
        J = w * np.einsum("xn,ni,nj->xij", M, phi, phi)
        step = np.linalg.solve(J, res[..., None])[..., 0]
        a -= step[:, 0]
        b -= step[:, 1:4]
        c -= step[:, 4]
    else:
        raise NumericalAbortError("discrete Maxwellian Newton did not converge")
    return M


def _minmod(p, q):
    return np.where(p * q > 0.0, np.where(np.abs(p) < np.abs(q), p, q), 0.0)


class SlabSolver:
    """Owns the immutable problem data and advances a SlabState."""

    def __init__(self, cfg: SlabConfig, profile: RayleighProfile,
                 op: CollisionOperator, burnett: BurnettFields,
                 pairs: np.ndarray | None = None,
                 gdict: GammaDictionary | None = None):
        self.cfg = cfg
        self.profile = profile
        self.op = op
        self.burnett = burnett
        self.pairs = pairs
        self.gdict = gdict
        self.grid = op.grid
        self.dx = cfg.x_max / cfg.n_x
        self.x3 = (np.arange(cfg.n_x) + 0.5) * self.dx
        self.dt_cfl = cfg.cfl * cfg.eps * self.dx / self.grid.v_max
        containment = 8.0 * math.sqrt(4.0 * profile.kappa * (cfg.t_final + profile.delta))
        if cfg.x_max < containment:
            raise ConfigurationError(
                f"x_max={cfg.x_max} does not contain the profile tail; "
                f"need >= {containment:.3g}"
            )
        if cfg.mode == "remainder" and cfg.include_Ltilde and gdict is None:
            raise ConfigurationError("include_Ltilde needs the Gamma dictionary")
        g = self.grid
        self._pos = g.v3 > 0
        self._neg = ~self._pos
        self._absv3_in = np.abs(g.v3[self._neg])
        self._kernel_cache = {}

    # -- shared pieces --------------------------------------------------------

    def _check_dt(self, dt: float):
        if dt > self.dt_cfl * (1.0 + 1e-12):
            raise CFLViolationError(
                f"dt={dt:.3e} exceeds the advective CFL bound {self.dt_cfl:.3e}"
            )

    def _transport(self, values: np.ndarray, ghost_wall: np.ndarray,
                   ghost_far: np.ndarray) -> np.ndarray:
        """Upwind approximation of d/dx3 with boundary ghost values."""
        g = self.grid
        dx = self.dx
        pos = self._pos
        neg = self._neg
        ext = np.empty((values.shape[0] + 2, values.shape[1]))
        ext[1:-1] = values
        ext[0] = ghost_wall
        ext[-1] = ghost_far
        D = np.empty_like(values)
        if self.cfg.limiter == "upwind":
            D[:, pos] = (ext[1:-1, pos] - ext[:-2, pos]) / dx
            D[:, neg] = (ext[2:, neg] - ext[1:-1, neg]) / dx
            return D
        # minmod MUSCL: limited slopes in the interior, first order at ghosts
        slope = np.zeros_like(ext)
        slope[1:-1] = _minmod(ext[1:-1] - ext[:-2], ext[2:] - ext[1:-1]) / dx
        # face values taken from the upwind side per velocity sign
        left_face = ext[:-1] + 0.5 * dx * slope[:-1]     # face i-1/2 from cell i-1
        right_face = ext[1:] - 0.5 * dx * slope[1:]      # face i-1/2 from cell i
        D[:, pos] = (left_face[1:, pos] - left_face[:-1, pos]) / dx
        D[:, neg] = (right_face[1:, neg] - right_face[:-1, neg]) / dx
        return D

    def _wall_data(self, t: float) -> WallData:
        f2w = build_f2(self.profile, self.burnett, t, np.array([0.0]))[0]
        return build_wall_data(self.profile, self.grid, self.cfg.eps, f2w)

    def _incoming_flux(self, trace: np.ndarray, weighted_by_sqrt_mu: bool) -> float:
        g = self.grid
        vals = trace[self._neg]
        if weighted_by_sqrt_mu:
            vals = vals * g.sqrt_mu[self._neg]
        return g.weight * float(np.sum(vals * self._absv3_in))

    # -- remainder mode ---------------------------------------------------------

    def _remainder_ghost(self, trace: np.ndarray, wd: WallData):
        g = self.grid
        I_R = self._incoming_flux(trace, weighted_by_sqrt_mu=True)
        kernel = (wd.M_w_discrete - wd.c_mu_discrete * g.mu) / g.sqrt_mu
        ghost = (wd.c_mu_discrete * g.sqrt_mu + kernel) * I_R + wd.r
        return ghost, I_R

    def _wall_flux_defect_remainder(self, trace: np.ndarray, ghost: np.ndarray,
                                    t: float, wd: WallData) -> float:
        """Net discrete v3-flux of the reconstructed F at the wall."""
        g = self.grid
        eps = self.cfg.eps
        f1w = self.profile.u_b * g.v1 * g.sqrt_mu
        f2w = build_f2(self.profile, self.burnett, t, np.array([0.0]))[0]
        base = g.mu + g.sqrt_mu * (eps * f1w + eps * eps * f2w)
        F_tr = base + eps ** 1.5 * g.sqrt_mu * np.where(self._pos, ghost, trace)
        return g.weight * float(np.sum(g.v3 * F_tr))

    def step_remainder(self, state: SlabState, dt: float) -> SlabState:
        self._check_dt(dt)
        cfg = self.cfg
        eps = cfg.eps
        g = self.grid
        R = state.values
        t = state.t
        wd = self._wall_data(t)
        ghost, _ = self._remainder_ghost(R[0], wd)
        defect = self._wall_flux_defect_remainder(R[0], ghost, t, wd)
        D = self._transport(R, ghost, np.zeros(g.size))
        rhs = -(g.v3[None, :] / eps) * D
        _, _, h = build_sources(self.profile, self.burnett, t, self.x3, eps,
                                self.pairs)
        rhs += h
        if cfg.include_Ltilde:
            coeffs = np.stack([
                f_coefficients(self.profile, t, x, eps) for x in self.x3
            ])  # (n_x, 4)
            lt = np.zeros_like(R)
            for k, M in enumerate(self.gdict.matrices):
                lt += coeffs[:, k:k + 1] * (R @ M.T)
            rhs += (2.0 / eps) * lt
        if cfg.include_GammaRR:
            gam = np.empty_like(R)
            for ix in range(cfg.n_x):
                gam[ix] = self.op.apply_Gamma(R[ix], R[ix])
            rhs += gam / math.sqrt(eps)
        Rstar = R + dt * rhs
        Rnew = self.op.implicit_solve(dt / eps ** 2, Rstar)
        if not np.all(np.isfinite(Rnew)):
            bad = np.argwhere(~np.isfinite(Rnew))[0]
            raise NumericalAbortError(
                f"non-finite remainder at x-index {bad[0]}, v-index {bad[1]}"
            )
        return SlabState(values=Rnew, t=t + dt, mode=state.mode,
                         steps=state.steps + 1,
                         min_value=state.min_value,
                         wall_flux_defect_max=max(state.wall_flux_defect_max,
                                                  abs(defect)))

    # -- direct modes -----------------------------------------------------------

    def step_direct_bgk(self, state: SlabState, dt: float) -> SlabState:
        self._check_dt(dt)
        cfg = self.cfg
        eps = cfg.eps
        g = self.grid
        if self.op.backend != "bgk":
            raise ConfigurationError("direct_bgk mode needs the BGK backend")
        F = state.values
        t = state.t
        wd = self._wall_data(t)
        I_F = self._incoming_flux(F[0], weighted_by_sqrt_mu=False)
        ghost = wd.M_w_discrete * I_F
        F_tr = np.where(self._pos, ghost, F[0])
        defect = g.weight * float(np.sum(g.v3 * F_tr))
        D = self._transport(F, ghost, g.mu)
        Fstar = F - dt * (g.v3[None, :] / eps) * D
        rho = g.weight * np.sum(Fstar, axis=1)
        m = g.weight * (Fstar @ g.v)
        E = g.weight * (Fstar @ g.vsq)
        Mx = discrete_maxwellian(g, rho, m, E)
        lam = dt * self.op.nu0 / eps ** 2
        Fnew = (Fstar + lam * Mx) / (1.0 + lam)
        if not np.all(np.isfinite(Fnew)):
            bad = np.argwhere(~np.isfinite(Fnew))[0]
            raise NumericalAbortError(
                f"non-finite distribution at x-index {bad[0]}, v-index {bad[1]}"
            )
        return SlabState(values=Fnew, t=t + dt, mode=state.mode,
                         steps=state.steps + 1,
                         min_value=min(state.min_value, float(Fnew.min())),
                         wall_flux_defect_max=max(state.wall_flux_defect_max,
                                                  abs(defect)))

    def step_direct_hs(self, state: SlabState, dt: float) -> SlabState:
        """Hard-sphere direct mode in perturbation form g = (F - mu)/sqrt_mu."""
        self._check_dt(dt)
        cfg = self.cfg
        eps = cfg.eps
        g = self.grid
        if self.op.backend != "hardsphere":
            raise ConfigurationError("direct_hs mode needs the hard-sphere backend")
        F = state.values
        t = state.t
        wd = self._wall_data(t)
        I_F = self._incoming_flux(F[0], weighted_by_sqrt_mu=False)
        ghost = wd.M_w_discrete * I_F
        F_tr = np.where(self._pos, ghost, F[0])
        defect = g.weight * float(np.sum(g.v3 * F_tr))
        D = self._transport(F, ghost, g.mu)
        pert = (F - g.mu[None, :]) / g.sqrt_mu[None, :]
        gam = np.empty_like(F)
        for ix in range(cfg.n_x):
            gam[ix] = self.op.apply_Gamma(pert[ix], pert[ix])
        pert_star = pert + dt * (
            -(g.v3[None, :] / eps) * D / g.sqrt_mu[None, :] + gam / eps ** 2
        )
        pert_new = self.op.implicit_solve(dt / eps ** 2, pert_star)
        Fnew = g.mu[None, :] + g.sqrt_mu[None, :] * pert_new
        if not np.all(np.isfinite(Fnew)):
            raise NumericalAbortError("non-finite distribution in direct_hs step")
        return SlabState(values=Fnew, t=t + dt, mode=state.mode,
                         steps=state.steps + 1,
                         min_value=min(state.min_value, float(Fnew.min())),
                         wall_flux_defect_max=max(state.wall_flux_defect_max,
                                                  abs(defect)))

    # -- lifecycle --------------------------------------------------------------

    def init_state(self, R0: np.ndarray | None = None) -> SlabState:
        cfg = self.cfg
        g = self.grid
        if cfg.mode == "remainder":
            vals = np.zeros((cfg.n_x, g.size)) if R0 is None else np.array(R0, dtype=np.float64)
            if vals.shape != (cfg.n_x, g.size):
                raise ConfigurationError("R0 has the wrong shape")
            return SlabState(values=vals, t=0.0, mode=cfg.mode)
        eps = cfg.eps
        f1 = build_f1(self.profile, g, 0.0, self.x3)
        f2 = build_f2(self.profile, self.burnett, 0.0, self.x3)
        F0 = g.mu[None, :] + g.sqrt_mu[None, :] * (eps * f1 + eps * eps * f2)
        if R0 is not None:
            F0 = F0 + eps ** 1.5 * g.sqrt_mu[None, :] * R0
        if float(F0.min()) < -cfg.positivity_tolerance:
            raise NegativeInitialDataError(
                f"initial distribution has min {F0.min():.3e}; u_b/eps too large"
            )
        return SlabState(values=F0, t=0.0, mode=cfg.mode,
                         min_value=float(F0.min()))

    def step(self, state: SlabState, dt: float) -> SlabState:
        if state.mode == "remainder":
            return self.step_remainder(state, dt)
        if state.mode == "direct_bgk":
            return self.step_direct_bgk(state, dt)
        return self.step_direct_hs(state, dt)

    def _equivalent_remainder(self, state: SlabState, f1: np.ndarray,
                              f2: np.ndarray) -> np.ndarray:
        """R reconstructed from a direct-mode F against the expansion."""
        g = self.grid
        eps = self.cfg.eps
        pert = (state.values - g.mu[None, :]) / g.sqrt_mu[None, :]
        return (pert - eps * f1 - eps * eps * f2) / eps ** 1.5

    def run(self, R0: np.ndarray | None = None):
        """Integrate to t_final; returns (final state, NormAccumulator)."""
        cfg = self.cfg
        g = self.grid
        state = self.init_state(R0)
        if cfg.t_final == 0.0:
            n_steps = 0
            dt = self.dt_cfl
        else:
            n_steps = max(1, int(math.ceil(cfg.t_final / self.dt_cfl - 1e-12)))
            dt = cfg.t_final / n_steps
        acc = nrm.NormAccumulator(g, cfg.eps, self.dx, self.op.nu)
        self._emit(state, acc)
        for k in range(n_steps):
            state = self.step(state, dt)
            f1 = build_f1(self.profile, g, state.t, self.x3)
            f2 = build_f2(self.profile, self.burnett, state.t, self.x3)
            if state.mode == "remainder":
                R = state.values
            else:
                R = self._equivalent_remainder(state, f1, f2)
            acc.add_dissipation(R, dt)
            if (k + 1) % cfg.output_every == 0 or k == n_steps - 1:
                self._emit(state, acc, f1=f1, f2=f2, R=R)
        return state, acc

    def _emit(self, state: SlabState, acc: nrm.NormAccumulator,
              f1=None, f2=None, R=None):
        g = self.grid
        eps = self.cfg.eps
        t = state.t
        if f1 is None:
            f1 = build_f1(self.profile, g, t, self.x3)
        if f2 is None:
            f2 = build_f2(self.profile, self.burnett, t, self.x3)
        if R is None:
            if state.mode == "remainder":
                R = state.values
            else:
                R = self._equivalent_remainder(state, f1, f2)
        if state.mode == "remainder":
            conv = nrm.convergence_error_remainder(g, f2, R, eps, self.dx)
        else:
            conv = nrm.convergence_error_direct(g, state.values, f1, eps, self.dx)
        wd = self._wall_data(t)
        kernel = (wd.M_w_discrete - wd.c_mu_discrete * g.mu) / g.sqrt_mu
        I_R = self._incoming_flux(R[0], weighted_by_sqrt_mu=True)
        q_trace = kernel * I_R + wd.r
        acc.add_snapshot(t, R, q_trace, conv)
