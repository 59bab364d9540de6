import math

import numpy as np
from scipy.integrate import trapezoid
import pytest

from rayslab.errors import ConfigurationError, DomainError
from rayslab.rayleigh import (
    RayleighProfile, eval_derivatives, eval_u1, fluid_norm_oracles,
)

PROF = RayleighProfile(u_b=0.05, kappa=0.8, delta=0.5)


def test_parameter_validation():
    with pytest.raises(ConfigurationError):
        RayleighProfile(u_b=-0.1, kappa=1.0)
    with pytest.raises(ConfigurationError):
        RayleighProfile(u_b=0.1, kappa=0.0)
    with pytest.raises(ConfigurationError):
        RayleighProfile(u_b=0.1, kappa=1.0, delta=0.0)


def test_domain_rejection():
    with pytest.raises(DomainError):
        eval_u1(PROF, -0.1, 0.0)
    with pytest.raises(DomainError):
        eval_u1(PROF, 0.1, np.array([-1.0, 2.0]))


def test_wall_and_farfield_values():
    for t in (0.0, 0.3, 2.0):
        assert eval_u1(PROF, t, 0.0) == PROF.u_b          # exact at the wall
        assert eval_u1(PROF, t, 60.0) < 1e-12
    x = np.linspace(0.0, 10.0, 200)
    u = eval_u1(PROF, 0.7, x)
    assert np.all(np.diff(u) < 0)                          # monotone decay


def test_heat_equation_residual_second_order():
    """FD Laplacian and time derivative reproduce u_t = kappa u_xx at
    second order in the mesh width."""
    t = 0.4
    resids = []
    for m in (64, 128, 256):
        x = np.linspace(0.0, 12.0, m + 1)
        hx = x[1] - x[0]
        ht = hx  # tie the FD time step to hx so the residual is O(h^2)
        u = eval_u1(PROF, t, x)
        lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / hx ** 2
        dudt = (eval_u1(PROF, t + ht, x) - eval_u1(PROF, t - ht, x)) / (2.0 * ht)
        resids.append(np.max(np.abs(dudt[1:-1] - PROF.kappa * lap)))
    rate1 = math.log2(resids[0] / resids[1])
    rate2 = math.log2(resids[1] / resids[2])
    assert rate1 > 1.7 and rate2 > 1.7


def test_analytic_derivatives_match_finite_differences():
    t, x = 0.6, np.linspace(0.1, 6.0, 25)
    du_dt, du_dx3, d2u_dx3x3, d2u_dtdx3, d2u_dt2 = eval_derivatives(PROF, t, x)
    e = 1e-5
    fd_t = (eval_u1(PROF, t + e, x) - eval_u1(PROF, t - e, x)) / (2 * e)
    fd_x = (eval_u1(PROF, t, x + e) - eval_u1(PROF, t, x - e)) / (2 * e)
    fd_xx = (eval_u1(PROF, t, x + e) - 2 * eval_u1(PROF, t, x)
             + eval_u1(PROF, t, x - e)) / e ** 2
    fd_tx = (eval_derivatives(PROF, t + e, x)[1]
             - eval_derivatives(PROF, t - e, x)[1]) / (2 * e)
    fd_tt = (eval_derivatives(PROF, t + e, x)[0]
             - eval_derivatives(PROF, t - e, x)[0]) / (2 * e)
    assert np.allclose(du_dt, fd_t, rtol=1e-7, atol=1e-12)
    assert np.allclose(du_dx3, fd_x, rtol=1e-7, atol=1e-12)
    assert np.allclose(d2u_dx3x3, fd_xx, rtol=1e-4, atol=1e-9)
    assert np.allclose(d2u_dtdx3, fd_tx, rtol=1e-6, atol=1e-12)
    assert np.allclose(d2u_dt2, fd_tt, rtol=1e-6, atol=1e-12)
    # compatibility with the heat equation to round-off
    assert np.allclose(du_dt, PROF.kappa * d2u_dx3x3, rtol=1e-14)


def test_du_dt_vanishes_at_wall():
    du_dt = eval_derivatives(PROF, 0.9, 0.0)[0]
    assert du_dt == 0.0


def test_l2_oracles_match_quadrature():
    x = np.linspace(0.0, 60.0, 120001)
    for t in np.linspace(0.0, 2.0, 10):
        oracles = fluid_norm_oracles(PROF, float(t))
        u = eval_u1(PROF, float(t), x)
        num = math.sqrt(trapezoid(u * u, x))
        assert num == pytest.approx(oracles["u_l2"], rel=1e-4)
        dx3 = eval_derivatives(PROF, float(t), x)[1]
        assert math.sqrt(trapezoid(dx3 * dx3, x)) == pytest.approx(
            oracles["du_dx3_l2"], rel=1e-4)
        assert oracles["du_dx3_linf"] == pytest.approx(np.max(np.abs(dx3)),
                                                       rel=1e-6)
        assert oracles["u_linf"] == PROF.u_b


def test_monitor_ratios_flat_over_time():
    """The normalized decay-rate monitors stay within a factor 3 over t in
    [0, T] for several time offsets (they are constant in closed form)."""
    for delta in (0.25, 0.5, 1.0):
        prof = RayleighProfile(u_b=0.05, kappa=0.8, delta=delta)
        for key in ("ratio_u_l2", "ratio_du_dx3_l2", "ratio_du_dt_l2"):
            vals = [fluid_norm_oracles(prof, t)[key]
                    for t in np.linspace(0.0, 1.0, 9)]
            assert np.isfinite(vals).all()
            assert max(vals) / min(vals) < 3.0
