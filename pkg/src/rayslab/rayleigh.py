"""Closed-form Rayleigh shear profile u = (u1(t, x3), 0, 0) and its norms.

u1 solves the half-line heat equation u1_t = kappa * u1_{x3 x3} with wall value
u_b and zero far field; all derivatives and the L^2/L^inf norms over x3 in
(0, inf) have closed forms up to three cached 1-D reference integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from .errors import ConfigurationError, DomainError

__all__ = ["RayleighProfile", "eval_u1", "eval_derivatives", "fluid_norm_oracles"]

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class RayleighProfile:
    """Wall speed scale u_b, viscosity kappa, initial-time offset delta."""

    u_b: float
    kappa: float
    delta: float = 0.5

    def __post_init__(self):
        if self.u_b < 0:
            raise ConfigurationError(f"u_b must be >= 0, got {self.u_b}")
        if self.kappa <= 0:
            raise ConfigurationError(f"kappa must be > 0, got {self.kappa}")
        if self.delta <= 0:
            raise ConfigurationError(f"delta must be > 0, got {self.delta}")


@lru_cache(maxsize=None)
def _reference_integrals():
    """(I2, J2, K2) = int_0^inf of erfc(z)^2, e^{-2z^2}, z^2 e^{-2z^2}."""
    i2 = quad(lambda z: erfc(z) ** 2, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
    j2 = quad(lambda z: math.exp(-2.0 * z * z), 0.0, np.inf, epsabs=1e-14)[0]
    k2 = quad(lambda z: z * z * math.exp(-2.0 * z * z), 0.0, np.inf, epsabs=1e-14)[0]
    return i2, j2, k2


def _check_domain(t, x3):
    if np.any(np.asarray(t) < 0):
        raise DomainError(f"t must be >= 0, got {t}")
    if np.any(np.asarray(x3) < 0):
        raise DomainError(f"x3 must be >= 0, got {x3}")


def _scale(p: RayleighProfile, t) -> float:
    return np.sqrt(4.0 * p.kappa * (np.asarray(t, dtype=np.float64) + p.delta))


def eval_u1(p: RayleighProfile, t, x3):
    """u1(t, x3) = u_b * erfc(x3 / sqrt(4*kappa*(t+delta)))."""
    _check_domain(t, x3)
    y = np.asarray(x3, dtype=np.float64) / _scale(p, t)
    out = p.u_b * erfc(y)
    return float(out) if np.ndim(out) == 0 else out


def eval_derivatives(p: RayleighProfile, t, x3):
    """Analytic derivatives (du_dt, du_dx3, d2u_dx3x3, d2u_dtdx3, d2u_dt2).

    Satisfies du_dt = kappa * d2u_dx3x3 pointwise to round-off.
    """
    _check_domain(t, x3)
    s = _scale(p, t)
    y = np.asarray(x3, dtype=np.float64) / s
    g = _TWO_OVER_SQRT_PI * np.exp(-y * y)
    kap = p.kappa
    du_dx3 = -p.u_b * g / s
    d2u_dx3x3 = 2.0 * p.u_b * y * g / (s * s)
    du_dt = kap * d2u_dx3x3
    d2u_dtdx3 = -p.u_b * g * (2.0 * kap / s**3) * (2.0 * y * y - 1.0)
    d2u_dt2 = p.u_b * g * (4.0 * kap * kap / s**4) * y * (2.0 * y * y - 3.0)
    if np.ndim(y) == 0:
        return (float(du_dt), float(du_dx3), float(d2u_dx3x3),
                float(d2u_dtdx3), float(d2u_dt2))
    return du_dt, du_dx3, d2u_dx3x3, d2u_dtdx3, d2u_dt2


def fluid_norm_oracles(p: RayleighProfile, t) -> dict:
    """Closed-form norms of u1(t, .) over x3 in (0, inf) and monitor ratios.

    The x3 integrals reduce by the substitution z = x3/s to cached reference
    integrals of erfc powers and Gaussians.
    """
    _check_domain(t, 0.0)
    i2, j2, k2 = _reference_integrals()
    s = float(_scale(p, t))
    kap = p.kappa
    u_l2 = p.u_b * math.sqrt(s * i2)
    du3_l2 = p.u_b * _TWO_OVER_SQRT_PI * math.sqrt(j2 / s)
    dut_l2 = p.u_b * 2.0 * _TWO_OVER_SQRT_PI * kap * math.sqrt(k2 / s**3)
    u_linf = p.u_b
    du3_linf = p.u_b / math.sqrt(math.pi * kap * (t + p.delta))
    td = t + p.delta
    return {
        "u_l2": u_l2,
        "du_dt_l2": dut_l2,
        "du_dx3_l2": du3_l2,
        "u_linf": u_linf,
        "du_dx3_linf": du3_linf,
        "ratio_u_l2": u_l2 / (p.u_b * td**0.25),
        "ratio_du_dx3_l2": du3_l2 / (p.u_b * td**-0.25),
        "ratio_du_dt_l2": dut_l2 / (p.u_b * td**-0.75),
    }
