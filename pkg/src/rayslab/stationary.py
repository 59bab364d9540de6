"""Steady half-line shear check: the connector profile U, the explicit
first-order field G1, and the far-field mismatch of the shifted Maxwellian.

The steady problem admits an explicit first-order solution G1 = (1 - U) v1
sqrt_mu whose transport residual cancels against the source exactly when the
collision operator annihilates v1 sqrt_mu, so the PDE check collapses to an
operator property. The far-field analysis quantifies why no nontrivial steady
state exists: the first-order far field mu + alpha v1 mu differs from the
required equilibrium by a strictly positive margin linear in the wall speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .collision import CollisionOperator
from .errors import DomainError
from .velocity import VelocityGrid, project_P

__all__ = [
    "StationaryProblem",
    "build_U",
    "build_G1",
    "residual_G1",
    "farfield_mismatch",
    "stationary_report",
]

Y_MAX_DEFAULT = 3.5
N_Y_DEFAULT = 64


def build_U(y_grid: np.ndarray) -> np.ndarray:
    """Connector profile U(y) = erfc(y); U(0) = 1, decays to 0."""
    y = np.asarray(y_grid, dtype=float)
    if np.any(y < 0):
        raise DomainError("stationary connector requires y >= 0")
    return erfc(y)


def _dU(y_grid: np.ndarray) -> np.ndarray:
    # d/dy erfc(y) = -(2/sqrt(pi)) exp(-y^2)
    y = np.asarray(y_grid, dtype=float)
    return -(2.0 / math.sqrt(math.pi)) * np.exp(-y * y)


@dataclass
class StationaryProblem:
    """Half-line steady shear setup at wall speed alpha."""

    grid: VelocityGrid
    alpha: float = 0.01
    y_max: float = Y_MAX_DEFAULT
    n_y: int = N_Y_DEFAULT
    y_grid: np.ndarray = field(init=False)
    U: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("wall speed alpha must lie in (0, 1)")
        if self.y_max <= 0 or self.n_y < 2:
            raise DomainError("need y_max > 0 and at least 2 half-line nodes")
        self.y_grid = np.linspace(0.0, self.y_max, self.n_y)
        self.U = build_U(self.y_grid)


def build_G1(problem: StationaryProblem) -> np.ndarray:
    """Explicit first-order steady field G1(y, v) = (1 - U(y)) v1 sqrt_mu.

    Vanishes identically at y = 0, so the zero-inflow condition on v2 > 0
    holds exactly; tends to v1 sqrt_mu in the far field.
    """
    g = problem.grid
    return (1.0 - problem.U)[:, None] * (g.v1 * g.sqrt_mu)[None, :]


def residual_G1(problem: StationaryProblem, op: CollisionOperator) -> float:
    """L2(y, v) residual of the first-order steady equation for G1.

    The transport term v2 dG1/dy (with the analytic derivative) cancels the
    source -U'(y) v1 v2 sqrt_mu identically, leaving (1 - U(y)) L(v1 sqrt_mu):
    the residual is the operator's kernel-annihilation defect scaled by the
    profile, and is independent of alpha.
    """
    g = problem.grid
    if op.grid is not g:
        raise DomainError("problem and collision operator use different grids")
    base = g.v1 * g.sqrt_mu
    dG1 = -_dU(problem.y_grid)[:, None] * base[None, :]
    source = _dU(problem.y_grid)[:, None] * (g.v1 * g.v2 * g.sqrt_mu)[None, :]
    LG1 = (1.0 - problem.U)[:, None] * op.apply_L(base)[None, :]
    res = g.v2[None, :] * dG1 + LG1 + source
    dy = problem.y_grid[1] - problem.y_grid[0]
    return math.sqrt(dy * g.weight * float(np.sum(res * res)))


def farfield_mismatch(problem: StationaryProblem) -> dict:
    """Quantifies the far-field obstruction to a nontrivial steady state.

    The steady solution's far field is mu + alpha v1 mu to first order, which
    is the shifted Maxwellian mu(v1 - alpha, v2, v3) up to O(alpha^2); both
    differ from mu by a margin proportional to alpha, so the equilibrium
    far-field condition forces the trivial solution.
    """
    g = problem.grid
    alpha = problem.alpha
    first_order = g.mu + alpha * g.v1 * g.mu
    shifted = (2.0 * math.pi) ** -1.5 * np.exp(
        -((g.v1 - alpha) ** 2 + g.v2 ** 2 + g.v3 ** 2) / 2.0
    )
    m_alpha = float(g.norm_l2(alpha * g.v1 * g.mu))
    gap2 = float(g.norm_l2(shifted - first_order))
    return {
        "alpha": alpha,
        "mismatch": m_alpha,
        "mismatch_over_alpha": m_alpha / alpha,
        "second_order_gap": gap2,
        "second_order_gap_over_alpha2": gap2 / alpha ** 2,
    }


def stationary_report(op: CollisionOperator, alphas=(0.01, 0.02, 0.04),
                      y_max: float = Y_MAX_DEFAULT, n_y: int = N_Y_DEFAULT) -> dict:
    """Full appendix check: residual, exact boundary trace, mismatch table."""
    g = op.grid
    rows = []
    residual = None
    trace_max = None
    for alpha in alphas:
        prob = StationaryProblem(g, alpha=alpha, y_max=y_max, n_y=n_y)
        if residual is None:
            residual = residual_G1(prob, op)
            G1 = build_G1(prob)
            inflow = g.v2 > 0
            trace_max = float(np.max(np.abs(G1[0][inflow])))
        rows.append(farfield_mismatch(prob))
    return {
        "residual": residual,
        "boundary_trace_max": trace_max,
        "mismatch_table": rows,
    }
