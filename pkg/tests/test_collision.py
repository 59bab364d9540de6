import glob
import math
import os

import numpy as np
import pytest
from scipy.special import erf

from rayslab.collision import (
    CollisionOperator, build_angular_rule, nu_hard_sphere,
)
from rayslab.errors import (
    BackendUnsupportedError, CacheIntegrityError, ConfigurationError,
    GridMismatchError, MemoryBudgetError, NotMicroscopicError,
)
from rayslab.velocity import build_grid, project_P

from conftest import make_rng


def nu_radial_oracle(r):
    """Hard-sphere collision frequency against a unit Gaussian background.

    The angular integral of |z . omega| over the half sphere is pi |z|, and
    the remaining Gaussian integral has the classical closed form."""
    r = max(r, 1e-12)
    return math.pi * (
        math.sqrt(2.0 / math.pi) * math.exp(-r * r / 2.0)
        + (r + 1.0 / r) * erf(r / math.sqrt(2.0))
    )


def test_angular_rule_weights():
    for order in (8, 16):
        om, w = build_angular_rule(order)
        assert np.isclose(np.sum(w), 2.0 * math.pi)
        assert np.allclose(np.einsum("ij,ij->i", om, om), 1.0)
    with pytest.raises(ConfigurationError):
        build_angular_rule(4)


def test_nu_band_and_monotonicity(grid16):
    nu = nu_hard_sphere(grid16)
    assert np.all(nu > 0)
    band = nu / np.sqrt(1.0 + grid16.vsq)
    assert band.max() / band.min() < 10.0
    # radial monotonicity along the first positive axis ray
    ray = (grid16.v2 == grid16.axis[8]) & (grid16.v3 == grid16.axis[8]) \
        & (grid16.v1 > 0)
    vals = nu[ray][np.argsort(grid16.v1[ray])]
    assert np.all(np.diff(vals) > 0)


def test_nu_matches_radial_oracle():
    # quadrature error against the closed form shrinks under refinement; the
    # slowest point is the kink of |v - u| near the origin
    errs = []
    for n in (8, 16, 24):
        g = build_grid(n, 6.0)
        nu = nu_hard_sphere(g)
        i0 = int(np.argmin(g.vsq))
        r0 = math.sqrt(g.vsq[i0])
        errs.append(abs(nu[i0] - nu_radial_oracle(r0)) / nu_radial_oracle(r0))
        i1 = int(np.argmin(np.abs(g.vsq - 9.0)))
        r1 = math.sqrt(g.vsq[i1])
        assert nu[i1] == pytest.approx(nu_radial_oracle(r1), rel=1e-3)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


@pytest.mark.parametrize("which", ["bgk", "hs"])
def test_null_space_annihilation(which, op_bgk16, op_hs12):
    op = op_bgk16 if which == "bgk" else op_hs12
    g = op.grid
    for k in range(5):
        chi = g.kernel_basis_on[:, k]
        assert g.norm_l2(op.apply_L(chi)) <= 1e-12 * g.norm_l2(chi)


def test_null_space_enforced_for_nonunit_cell_volume(tmp_path):
    # regression: the low-rank kernel correction must be exact for any cell
    # volume, not just the h = 1 grids where weight factors collapse
    for n in (8, 10):
        g = build_grid(n, 6.0)
        op = CollisionOperator(g, "hardsphere", cache_dir=str(tmp_path))
        assert g.weight != 1.0
        for k in range(5):
            chi = g.kernel_basis_on[:, k]
            assert g.norm_l2(op.apply_L(chi)) <= 1e-12 * g.norm_l2(chi)


@pytest.mark.parametrize("which", ["bgk", "hs"])
def test_self_adjoint_and_nonnegative(which, op_bgk16, op_hs12):
    op = op_bgk16 if which == "bgk" else op_hs12
    g = op.grid
    rng = make_rng(10)
    for _ in range(20):
        f = rng.standard_normal(g.size)
        h = rng.standard_normal(g.size)
        lhs = g.inner(op.apply_L(f), h)
        rhs = g.inner(f, op.apply_L(h))
        assert abs(lhs - rhs) <= 1e-12 * g.norm_l2(f) * g.norm_l2(h)
        assert g.inner(op.apply_L(f), f) >= -1e-12 * g.norm_l2(f) ** 2


def test_bgk_acts_as_nu0_off_kernel(grid16):
    op = CollisionOperator(grid16, "bgk", nu0=1.0)
    f = grid16.v1 * grid16.v3 * grid16.sqrt_mu
    assert grid16.norm_l2(op.apply_L(f) - f) <= 1e-12


def test_L_commutes_with_P(op_hs12):
    g = op_hs12.grid
    rng = make_rng(11)
    f = rng.standard_normal(g.size)
    Lf = op_hs12.apply_L(f)
    PLf, _ = project_P(g, Lf)
    Pf, _ = project_P(g, f)
    assert g.norm_l2(PLf) <= 1e-12 * g.norm_l2(f)
    assert g.norm_l2(op_hs12.apply_L(Pf)) <= 1e-12 * g.norm_l2(f)


def test_solve_Linv(op_bgk16, op_hs12):
    g16 = op_bgk16.grid
    op2 = CollisionOperator(g16, "bgk", nu0=2.0)
    target = g16.v1 * g16.v3 * g16.sqrt_mu
    phi = op2.solve_Linv(target)
    assert g16.norm_l2(phi - 0.5 * target) <= 1e-12

    g = op_hs12.grid
    rng = make_rng(12)
    f = rng.standard_normal(g.size)
    Pf, _ = project_P(g, f)
    micro = f - Pf
    phi = op_hs12.solve_Linv(micro)
    assert g.norm_l2(op_hs12.apply_L(phi) - micro) <= 1e-10 * g.norm_l2(micro)
    Pphi, _ = project_P(g, phi)
    assert g.norm_l2(Pphi) <= 1e-10 * g.norm_l2(phi)

    with pytest.raises(NotMicroscopicError):
        op_hs12.solve_Linv(g.sqrt_mu)


def test_implicit_solve_round_trip(op_hs12):
    g = op_hs12.grid
    rng = make_rng(13)
    f = rng.standard_normal((3, g.size))
    lam = 0.37
    sol = op_hs12.implicit_solve(lam, f)
    back = sol + lam * np.array([op_hs12.apply_L(s) for s in sol])
    assert np.max(np.abs(back - f)) <= 1e-10 * np.max(np.abs(f))


def test_spectral_gap(op_hs12, op_bgk16):
    sigma = op_hs12.spectral_gap()
    assert 0.0 < sigma < 1.0
    assert op_bgk16.spectral_gap() == pytest.approx(1.0)


def test_gamma_symmetry_and_equilibrium_defect(op_hs12):
    g = op_hs12.grid
    rng = make_rng(14)
    f = np.exp(-0.3 * g.vsq) * rng.standard_normal(g.size)
    h = np.exp(-0.3 * g.vsq) * rng.standard_normal(g.size)
    assert np.array_equal(op_hs12.apply_Gamma(f, h), op_hs12.apply_Gamma(h, f))
    defect = g.norm_l2(op_hs12.apply_Gamma(g.sqrt_mu, g.sqrt_mu))
    assert defect < 1e-3 * g.norm_l2(g.sqrt_mu)


def test_gamma_conservation_moments(op_hs12):
    g = op_hs12.grid
    f = g.v1 * g.sqrt_mu
    h = g.v3 * g.sqrt_mu
    out = op_hs12.apply_Gamma(f, h)
    for chi in (g.sqrt_mu, g.v1 * g.sqrt_mu, g.v3 * g.sqrt_mu,
                g.vsq * g.sqrt_mu):
        assert abs(g.inner(out, chi)) < 1e-3 * g.norm_l2(out) * g.norm_l2(chi)


def test_gamma_requires_hard_sphere(op_bgk16):
    g = op_bgk16.grid
    with pytest.raises(BackendUnsupportedError):
        op_bgk16.apply_Gamma(g.sqrt_mu, g.sqrt_mu)


def test_gamma_dictionary_consistency(op_hs12):
    g = op_hs12.grid
    basis = np.stack([g.sqrt_mu, g.v1 * g.sqrt_mu])
    gdict = op_hs12.build_gamma_dictionary(basis)
    rng = make_rng(15)
    h = np.exp(-0.25 * g.vsq) * rng.standard_normal(g.size)
    for k in range(2):
        direct = op_hs12.apply_Gamma(basis[k], h)
        via_matrix = gdict.matrices[k] @ h
        scale = max(g.norm_l2(direct), 1e-30)
        assert g.norm_l2(via_matrix - direct) <= 1e-10 * scale


def test_operator_cache_round_trip_and_integrity(grid8, tmp_path):
    cache = str(tmp_path)
    op1 = CollisionOperator(grid8, "hardsphere", cache_dir=cache)
    K1 = op1.K.copy()
    op2 = CollisionOperator(grid8, "hardsphere", cache_dir=cache)
    assert np.array_equal(op2.K, K1)        # bit-exact reload
    cached = glob.glob(os.path.join(cache, "*"))
    assert cached
    with open(cached[0], "r+b") as fh:
        fh.seek(-16, os.SEEK_END)
        fh.write(b"\xff" * 8)
    with pytest.raises(CacheIntegrityError):
        CollisionOperator(grid8, "hardsphere", cache_dir=cache)


def test_backend_and_budget_validation(grid8):
    with pytest.raises(BackendUnsupportedError):
        CollisionOperator(grid8, "fokker-planck")
    with pytest.raises(MemoryBudgetError):
        CollisionOperator(grid8, "hardsphere", byte_budget=1000)


def test_grid_mismatch(op_bgk16, grid8):
    with pytest.raises(GridMismatchError):
        op_bgk16.apply_L(np.zeros(grid8.size))
