"""End-to-end acceptance suite: one test and one PASS/FAIL line per criterion.

The epsilon sweep (criterion 7) is run once per session and shared by the
boundedness (8) and determinism (11) criteria. Heavy hard-sphere operators are
built per criterion and released to stay inside the memory budget.
"""

import filecmp
import gc
import math
import os

import numpy as np
import pytest
from scipy.integrate import trapezoid

import rayslab.expansion as ex
import rayslab.harness as hz
import rayslab.stationary as st
from rayslab.collision import CollisionOperator
from rayslab.config import RunConfig
from rayslab.rayleigh import RayleighProfile, eval_u1, fluid_norm_oracles
from rayslab.solver import SlabConfig, SlabSolver
from rayslab.velocity import build_grid, project_P

from conftest import ACCEPTANCE_LINES, make_rng


def report(num: int, name: str, ok: bool, detail: str):
    line = f"criterion {num:2d} [{name}]: {'PASS' if ok else 'FAIL'} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def sweep7(tmp_path_factory):
    """Criterion-7 sweep at the default configuration, serial."""
    out = str(tmp_path_factory.mktemp("sweep7"))
    cfg = RunConfig()    # direct BGK, u_b=0.05, delta=0.5, T=0.5, n_x=200, n_v=16
    res = hz.cmd_sweep(cfg, workers=1, out_dir=out)
    return cfg, res, out


def test_criterion_1_quadrature_fidelity():
    g = build_grid(24, 6.0)
    w = g.weight
    mass = w * float(np.sum(g.mu))
    m2 = w * float(np.sum(g.v1 ** 2 * g.mu))
    m22 = w * float(np.sum(g.v1 ** 2 * g.v2 ** 2 * g.mu))
    d = (abs(mass - 1.0), abs(m2 - 1.0), abs(m22 - 1.0))
    ok = d[0] < 1e-6 and d[1] < 1e-6 and d[2] < 1e-5
    report(1, "quadrature fidelity", ok,
           f"n=24 moment defects {d[0]:.2e}/{d[1]:.2e}/{d[2]:.2e}")


def test_criterion_2_operator_invariants(op_bgk16, op_hs16, cache_dir):
    results = []
    for op in (op_bgk16, op_hs16):
        g = op.grid
        kdef = max(float(g.norm_l2(op.apply_L(g.kernel_basis_on[:, k])))
                   for k in range(5))
        rng = make_rng(100)
        F = rng.standard_normal((1000, g.size))
        H = rng.standard_normal((1000, g.size))
        LF = op.apply_L(F)
        LH = op.apply_L(H)
        lhs = g.weight * np.einsum("ij,ij->i", LF, H)
        rhs = g.weight * np.einsum("ij,ij->i", F, LH)
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        sa = float(np.max(np.abs(lhs - rhs) / np.maximum(scale, 1e-300)))
        quad = g.weight * np.einsum("ij,ij->i", LF, F)
        G = rng.standard_normal((9000, g.size))
        quad2 = g.weight * np.einsum("ij,ij->i", op.apply_L(G), G)
        nn = float(min(quad.min(), quad2.min()))
        results.append((op.backend, kdef, sa, nn))
        del F, H, LF, LH, G
    gaps = [op_hs16.spectral_gap()]
    for n in (20, 24):
        op = CollisionOperator(build_grid(n, 6.0), "hardsphere",
                               cache_dir=cache_dir, byte_budget=int(3e9))
        gaps.append(op.spectral_gap())
        del op
        gc.collect()
    gap_ok = all(s > 0 for s in gaps) and max(gaps) / min(gaps) < 1.5
    ok = gap_ok
    for backend, kdef, sa, nn in results:
        ok = ok and kdef <= 1e-12 and sa <= 1e-12 and nn >= -1e-12
    detail = "; ".join(
        f"{b}: kernel {k:.1e}, adjoint {s:.1e}, min form {n:.1e}"
        for b, k, s, n in results)
    report(2, "operator invariants", ok,
           detail + f"; gaps n16/20/24 = {gaps[0]:.4f}/{gaps[1]:.4f}/{gaps[2]:.4f}")


def test_criterion_3_viscosity(grid16, op_hs16):
    errs = []
    for nu0 in (0.5, 1.0, 2.0):
        op = CollisionOperator(grid16, "bgk", nu0=nu0)
        errs.append(abs(ex.compute_kappa(op).kappa - 1.0 / nu0) * nu0)
    rep = ex.compute_kappa(op_hs16)
    ok = max(errs) < 1e-3 and rep.tensor_residual < 0.02 and rep.offdiag_ratio < 0.02
    report(3, "effective viscosity", ok,
           f"bgk rel err {max(errs):.1e}; hs kappa {rep.kappa:.5f}, "
           f"tensor {rep.tensor_residual:.4f}, offdiag {rep.offdiag_ratio:.4f}")


def test_criterion_4_profile_oracles():
    prof = RayleighProfile(u_b=0.05, kappa=0.8, delta=0.5)
    t = 0.4
    resids = []
    for m in (64, 128, 256):
        x = np.linspace(0.0, 12.0, m + 1)
        hx = x[1] - x[0]
        u = eval_u1(prof, t, x)
        lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / hx ** 2
        dudt = (eval_u1(prof, t + hx, x) - eval_u1(prof, t - hx, x)) / (2.0 * hx)
        resids.append(np.max(np.abs(dudt[1:-1] - prof.kappa * lap)))
    rates = [math.log2(resids[i] / resids[i + 1]) for i in range(2)]
    xq = np.linspace(0.0, 60.0, 120001)
    worst = 0.0
    for tt in np.linspace(0.0, 2.0, 10):
        num = math.sqrt(float(trapezoid(eval_u1(prof, float(tt), xq) ** 2, xq)))
        ref = fluid_norm_oracles(prof, float(tt))["u_l2"]
        worst = max(worst, abs(num - ref) / ref)
    wall = all(eval_u1(prof, tt, 0.0) == prof.u_b for tt in (0.0, 0.3, 1.7))
    ok = min(rates) > 1.7 and worst < 1e-4 and wall
    report(4, "profile oracles", ok,
           f"FD rates {rates[0]:.2f}/{rates[1]:.2f}, L2 defect {worst:.1e}, "
           f"wall exact {wall}")


def test_criterion_5_expansion_identities(op_hs16, cache_dir):
    def ph1_ratio(op):
        g = op.grid
        bur = ex.build_burnett(op)
        pairs = ex.build_gamma_pairs(op, bur)
        prof = RayleighProfile(u_b=0.05, kappa=bur.kappa, delta=0.5)
        x3 = np.linspace(0.0, 8.0, 17)
        h1, _, _ = ex.build_sources(prof, bur, 0.1, x3, 0.1, pairs)
        Ph1, _ = project_P(g, h1)
        ratio = g.norm_l2(Ph1.ravel()) / g.norm_l2(h1.ravel())
        f2err = ex.f2_cross_check(prof, bur, op, 0.1, x3)
        f2 = ex.build_f2(prof, bur, 0.1, x3)
        _, mom = project_P(g, f2)
        bmom = float(np.max(np.abs(mom.b)))
        return ratio, f2err, bmom

    r16, f2err, bmom = ph1_ratio(op_hs16)
    op20 = CollisionOperator(build_grid(20, 6.0), "hardsphere",
                             angular_order=16, cache_dir=cache_dir,
                             byte_budget=int(3e9))
    r20, _, _ = ph1_ratio(op20)
    del op20
    gc.collect()
    ok = r16 < 1e-2 and r20 < r16 and f2err < 1e-8 and bmom < 1e-6
    report(5, "expansion identities", ok,
           f"Ph1/h1 {r16:.2e} -> {r20:.2e} one notch up, f2 gap {f2err:.1e}, "
           f"f2 b-moment {bmom:.1e}")


def test_criterion_6_wall_maxwellian_gaps(grid16):
    prof = RayleighProfile(u_b=0.05, kappa=1.0, delta=0.5)
    f2w = np.zeros(grid16.size)
    g1, g2 = [], []
    for eps in (0.4, 0.2, 0.1, 0.05, 0.025):
        wd = ex.build_wall_data(prof, grid16, eps, f2w)
        g1.append(wd.taylor_gap_1 / eps)
        g2.append(wd.taylor_gap_2 / eps ** 2)
    fac1 = max(g1) / min(g1)
    fac2 = max(g2) / min(g2)
    ok = fac1 < 3.0 and fac2 < 3.0
    report(6, "wall Maxwellian gaps", ok,
           f"gap1/eps factor {fac1:.2f}, gap2/eps^2 factor {fac2:.2f} "
           f"over eps in {{0.4..0.025}}")


def test_criterion_7_convergence_sweep(sweep7):
    cfg, res, _ = sweep7
    E = {row[0]: row[1] for row in res.rows}
    eps = cfg.epsilons
    decreasing = all(E[a] > E[b] for a, b in zip(eps, eps[1:]))
    p = res.fitted_rate
    ratio = E[0.1] / E[0.2]
    ok = decreasing and not res.degenerate and p >= 0.45 and ratio <= 0.8
    report(7, "convergence sweep", ok,
           f"E = {E[0.4]:.3e}/{E[0.2]:.3e}/{E[0.1]:.3e}, rate p = {p:.3f}, "
           f"E(0.1)/E(0.2) = {ratio:.3f}")


def test_criterion_8_uniform_boundedness(sweep7, op_hs12):
    cfg, res, _ = sweep7
    M = [row[2] for row in res.rows]
    N = [row[3] for row in res.rows]
    m_fac = max(M) / min(M)
    n_fac = max(N) / min(N)

    # remainder-mode hard-sphere run on the coarsest grid with the linearized
    # coupling and the quadratic term both on
    bur = ex.build_burnett(op_hs12)
    pairs = ex.build_gamma_pairs(op_hs12, bur)
    gdict = op_hs12.build_gamma_dictionary(ex.dictionary_basis(bur))
    prof = RayleighProfile(u_b=0.05, kappa=bur.kappa, delta=0.5)
    scfg = SlabConfig(eps=0.2, n_x=8, x_max=6.0, t_final=0.05,
                      mode="remainder", include_Ltilde=True,
                      include_GammaRR=True, output_every=1)
    sol = SlabSolver(scfg, prof, op_hs12, bur, pairs=pairs, gdict=gdict)
    state, acc = sol.run()
    Mr, Nr = acc.current_energy_norms()
    hs_ok = (np.isfinite(Mr) and np.isfinite(Nr)
             and state.wall_flux_defect_max <= 1e-12)

    n_note = "" if n_fac < 3.0 else (
        " [known failure: N = sqrt(eps) sup w|R| + eps^1.5 sup w|dtR| scales"
        " ~ eps for zero-initial remainder data, so constancy across eps is"
        f" structurally unattainable; the uniform bound N <= {max(N):.3f}"
        " ~ 3.4 u_b still holds at every eps]")
    ok = m_fac < 3.0 and n_fac < 3.0 and hs_ok
    report(8, "uniform boundedness", ok,
           f"M factor {m_fac:.2f} (<3), N factor {n_fac:.2f} (<3){n_note}; "
           f"hard-sphere remainder run: M = {Mr:.3e}, N = {Nr:.3e}, wall flux "
           f"defect {state.wall_flux_defect_max:.1e} <= 1e-12: {hs_ok}")


def test_criterion_9_stationary_appendix(op_hs16):
    g = op_hs16.grid
    rep = st.stationary_report(op_hs16)
    bound = 1e-10 * float(g.norm_l2(g.v1 * g.v2 * g.sqrt_mu))
    ratios = [r["mismatch_over_alpha"] for r in rep["mismatch_table"]]
    const = (max(ratios) - min(ratios)) / ratios[0]
    gaps = [r["second_order_gap_over_alpha2"] for r in rep["mismatch_table"]]
    gap_fac = max(gaps) / min(gaps)
    ok = (rep["residual"] <= bound and rep["boundary_trace_max"] == 0.0
          and const <= 1e-10 and gap_fac < 2.0)
    report(9, "stationary half-line", ok,
           f"residual {rep['residual']:.1e} <= {bound:.1e}, trace "
           f"{rep['boundary_trace_max']:.1e}, m/alpha spread {const:.1e}, "
           f"gap/alpha^2 factor {gap_fac:.2f}")


def test_criterion_10_zero_data_fixed_points(op_bgk16):
    bur = ex.build_burnett(op_bgk16)
    prof = RayleighProfile(u_b=0.0, kappa=bur.kappa, delta=0.5)
    g = op_bgk16.grid
    # t_final only gates the containment check; the 10^3 steps are manual
    scfg = SlabConfig(eps=0.3, n_x=8, x_max=12.0, t_final=0.01,
                      mode="remainder", include_Ltilde=False)
    sol = SlabSolver(scfg, prof, op_bgk16, bur)
    state = sol.init_state()
    for _ in range(1000):
        state = sol.step(state, sol.dt_cfl)
    rem_max = float(np.max(np.abs(state.values)))

    scfg_d = SlabConfig(eps=0.3, n_x=8, x_max=12.0, t_final=0.01,
                        mode="direct_bgk", include_Ltilde=False)
    sol_d = SlabSolver(scfg_d, prof, op_bgk16, bur)
    state_d = sol_d.init_state()
    for _ in range(1000):
        state_d = sol_d.step(state_d, sol_d.dt_cfl)
    dir_dev = float(np.max(np.abs(state_d.values - g.mu[None, :]))) / g.mu.max()

    # the wall renormalization takes the ratio of two independent discrete
    # flux quadratures, so zero is preserved to round-off rather than bitwise
    ok = rem_max <= 1e-15 and dir_dev <= 1e-11
    report(10, "zero-data fixed points", ok,
           f"remainder max |R| = {rem_max:.1e} after 10^3 steps, direct "
           f"max |F - mu|/max mu = {dir_dev:.1e}")


def test_criterion_11_determinism(sweep7, tmp_path_factory):
    cfg, _, out1 = sweep7
    out2 = str(tmp_path_factory.mktemp("sweep11"))
    hz.cmd_sweep(cfg, workers=8, out_dir=out2)
    mismatched = []
    names = ["sweep.csv"] + [
        os.path.join(f"eps_{e:.17g}", "norms.csv") for e in cfg.epsilons]
    for name in names:
        if not filecmp.cmp(os.path.join(out1, name), os.path.join(out2, name),
                           shallow=False):
            mismatched.append(name)
    ok = not mismatched
    report(11, "determinism", ok,
           f"{len(names)} CSV files bit-identical across 1 and 8 workers"
           + (f"; mismatched: {mismatched}" if mismatched else ""))
