import math

import numpy as np
import pytest
from scipy.special import erfc

import rayslab.stationary as st
from rayslab.errors import DomainError
from rayslab.velocity import project_P


def test_connector_examples():
    assert st.build_U(np.zeros(1))[0] == 1.0
    # erfc(3) to the tabulated value
    assert st.build_U(np.array([3.0]))[0] == pytest.approx(2.2090e-5, rel=1e-4)
    y = np.linspace(0.0, 4.0, 41)
    U = st.build_U(y)
    assert np.all(np.diff(U) < 0)
    with pytest.raises(DomainError):
        st.build_U(np.array([-0.5, 1.0]))


def test_problem_validation(grid8):
    with pytest.raises(DomainError):
        st.StationaryProblem(grid8, alpha=0.0)
    with pytest.raises(DomainError):
        st.StationaryProblem(grid8, alpha=1.0)
    with pytest.raises(DomainError):
        st.StationaryProblem(grid8, alpha=0.1, y_max=-1.0)


def test_G1_boundary_trace_exactly_zero(grid16):
    prob = st.StationaryProblem(grid16, alpha=0.02)
    G1 = st.build_G1(prob)
    inflow = grid16.v2 > 0
    assert np.max(np.abs(G1[0][inflow])) == 0.0
    assert np.max(np.abs(G1[0])) == 0.0           # vanishes for all v at y=0


def test_G1_farfield_approaches_first_moment(grid16):
    prob = st.StationaryProblem(grid16, alpha=0.02, y_max=3.5)
    G1 = st.build_G1(prob)
    target = grid16.v1 * grid16.sqrt_mu
    gap = grid16.norm_l2(G1[-1] - target)
    # erfc(3.5) ~ 7.4e-7 leaves a sub-1e-5 relative far-field gap
    assert gap < 1e-5 * grid16.norm_l2(target)


def test_G1_macroscopic_structure(grid16):
    prob = st.StationaryProblem(grid16, alpha=0.05)
    G1 = st.build_G1(prob)
    PG1, moments = project_P(grid16, G1)
    # purely macroscopic: momentum density (1 - U) in the v1 slot only
    assert grid16.norm_l2((G1 - PG1).ravel()) <= 1e-12
    assert np.allclose(moments.b[:, 0], 1.0 - prob.U, atol=1e-12)
    assert np.max(np.abs(moments.b[:, 1:])) <= 1e-14
    assert np.max(np.abs(moments.a)) <= 1e-14
    assert np.max(np.abs(moments.c)) <= 1e-14


@pytest.mark.parametrize("which", ["bgk", "hs"])
def test_residual_reduces_to_kernel_defect(which, op_bgk16, op_hs12):
    op = op_bgk16 if which == "bgk" else op_hs12
    g = op.grid
    prob = st.StationaryProblem(g, alpha=0.01)
    res = st.residual_G1(prob, op)
    # the transport/source cancellation is exact, so the residual is the
    # kernel-annihilation defect of L on v1 sqrt_mu times the profile factor
    defect = g.norm_l2(op.apply_L(g.v1 * g.sqrt_mu))
    dy = prob.y_grid[1] - prob.y_grid[0]
    prof = math.sqrt(dy * float(np.sum((1.0 - prob.U) ** 2)))
    # the match is exact up to round-off of the cancelled transport terms
    assert abs(res - prof * defect) <= 0.05 * prof * defect + 1e-15
    assert res <= 1e-10 * g.norm_l2(g.v1 * g.v2 * g.sqrt_mu)


def test_residual_independent_of_alpha(op_bgk16):
    g = op_bgk16.grid
    vals = [st.residual_G1(st.StationaryProblem(g, alpha=a), op_bgk16)
            for a in (0.01, 0.05, 0.2)]
    assert vals[0] == vals[1] == vals[2]


def test_farfield_mismatch_linear_in_alpha(grid16):
    rows = [st.farfield_mismatch(st.StationaryProblem(grid16, alpha=a))
            for a in (0.01, 0.02, 0.04)]
    ratios = [r["mismatch_over_alpha"] for r in rows]
    # exact constancy: the margin is ||v1 mu|| alpha by construction
    assert ratios[0] == pytest.approx(ratios[1], rel=1e-14)
    assert ratios[1] == pytest.approx(ratios[2], rel=1e-14)
    assert ratios[0] == pytest.approx(float(grid16.norm_l2(grid16.v1 * grid16.mu)),
                                      rel=1e-14)
    gaps = [r["second_order_gap_over_alpha2"] for r in rows]
    assert max(gaps) / min(gaps) < 2.0


def test_report_shape(op_bgk16):
    rep = st.stationary_report(op_bgk16)
    assert rep["boundary_trace_max"] == 0.0
    assert len(rep["mismatch_table"]) == 3
    assert rep["residual"] >= 0.0
