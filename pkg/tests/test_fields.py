import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import asymmetric_profile
from roughwall.cell import CellResolution, solve_cell
from roughwall.fields import (
    CompositeFlags,
    Provenance,
    chi_c,
    compose,
    effective,
    poiseuille,
    sample_grid,
    side_layer_norms,
    side_layers,
    slip_identity_residual,
)
from roughwall.geometry import Grading
from roughwall.steady import FlowCase, MeshOptions, perturbation_field, solve_steady

RES = CellResolution(nx=16, grading=Grading(4, 16, 2.0, growth=1.25, cap=0.5))
MESH = MeshOptions(cells_per_period=16, ny=36, grading=Grading(4, 16, 2.0))


@pytest.fixture(scope="module")
def asym_corr():
    return solve_cell(asymmetric_profile(), 8.0, RES)


@pytest.fixture(scope="module")
def cos_corr(cosine025):
    return solve_cell(cosine025, 8.0, RES)


def test_poiseuille_closed_form():
    U = poiseuille(0.0, -1.0)
    x = np.array([[0.3, 0.0], [0.3, 0.5], [0.9, 1.0], [0.2, -0.05]])
    assert np.allclose(U.velocity(x)[:, 0], [0.0, 0.125, 0.0, 0.0])
    assert np.allclose(U.pressure(x), -x[:, 0])
    assert U.provenance is Provenance.POISEUILLE


@given(eps=st.sampled_from([1 / 4, 1 / 8, 1 / 16]), alpha=st.floats(0.0, 0.5), drop=st.floats(-2, 2))
def test_effective_satisfies_slip_and_noslip(eps, alpha, drop):
    U = effective(0.0, drop, eps, alpha)
    x = np.array([[0.5, 0.0], [0.5, 1.0]])
    u = U.velocity(x)[:, 0]
    g = U.gradient(x)[:, 0, 1]
    assert u[0] == pytest.approx(eps * alpha * g[0], abs=1e-14)
    assert u[1] == pytest.approx(0.0, abs=1e-14)


@given(eps=st.floats(0.001, 0.5), alpha=st.floats(0.0, 1.0), drop=st.floats(-5, 5), x2=st.floats(0.0, 1.0))
def test_slip_identity(eps, alpha, drop, x2):
    assert abs(slip_identity_residual(0.0, drop, eps, alpha, [x2])[0]) <= 1e-12


def test_effective_reduces_to_poiseuille_without_slip():
    x = np.column_stack([np.full(11, 0.4), np.linspace(0, 1, 11)])
    assert np.allclose(effective(0.0, -1.0, 0.125, 0.0).velocity(x), poiseuille(0.0, -1.0).velocity(x), atol=1e-15)


def test_chi_c_profile():
    x = np.array([[0.1, -0.05], [0.1, 0.25], [0.1, 1.0]])
    assert np.allclose(chi_c().velocity(x)[:, 0], [1.0, 0.75, 0.0])


def test_side_layers_vanish_for_symmetric_profile(cos_corr):
    s_in, s_out = side_layers(cos_corr, 1 / 8)
    assert s_in.norms(2)[0] < 1e-10
    assert s_out.norms(2)[0] < 1e-10


def test_side_layers_are_solenoidal(asym_corr):
    eps = 1 / 8
    for layer in side_layers(asym_corr, eps, 0.25):
        a, b = layer.support
        pts = np.column_stack([np.linspace(a + 1e-3, b - 1e-3, 7), np.linspace(0.01, 0.9, 7)])
        _, g = layer(pts)
        assert np.max(np.abs(g[:, 0, 0] + g[:, 1, 1])) < 1e-12


def test_side_layers_vanish_outside_support(asym_corr):
    s_in, s_out = side_layers(asym_corr, 1 / 8, 0.25)
    pts = np.array([[0.5, 0.05], [0.05, -0.01], [0.02, 1.0]])
    assert np.all(s_in(pts)[0] == 0.0)
    assert np.all(s_out(pts)[0] == 0.0)


def test_inflow_trace_cancels_corrector_normal_velocity(asym_corr):
    eps = 1 / 8
    s_in, _ = side_layers(asym_corr, eps, 0.25)
    y2 = np.array([0.2, 1.0, 3.0])
    pts = np.column_stack([np.zeros(3), eps * y2])
    v2, _, _ = asym_corr.seam_trace(y2)
    assert np.allclose(s_in.velocity(pts)[:, 1], eps * v2, atol=1e-14)


def test_side_norms_are_self_similar(asym_corr):
    n8 = side_layer_norms(side_layers(asym_corr, 1 / 8)[0], 2)
    n16 = side_layer_norms(side_layers(asym_corr, 1 / 16)[0], 2)
    assert np.log2(n8[0] / n16[0]) == pytest.approx(2.0, abs=1e-6)
    assert np.log2(n8[1] / n16[1]) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        side_layer_norms(side_layers(asym_corr, 1 / 8)[0], 3)


@pytest.fixture(scope="module")
def cos_steady(cosine025):
    return solve_steady(FlowCase(0.0, -1.0, 1 / 4, cosine025), MESH)


def test_composite_without_corrections_is_perturbation(cos_steady, cos_corr):
    W = compose(cos_steady, cos_corr, CompositeFlags.none())
    pert = perturbation_field(cos_steady)
    pts = np.array([[0.3, 0.4], [0.77, 0.05], [0.12, -0.02]])
    u, _ = W.evaluate(pts)
    up, _, _ = pert.evaluate(pts)
    assert np.allclose(u, up, atol=1e-12)


def test_composite_vanishes_on_lid(cos_steady, cos_corr):
    W = compose(cos_steady, cos_corr, CompositeFlags.full())
    pts = np.column_stack([np.linspace(0.05, 0.95, 9), np.ones(9)])
    # at eps = 1/4 the lid is y2 = 4 inside the strip, where V - alpha has decayed to ~1e-12
    assert np.max(np.abs(W.evaluate(pts)[0])) < 1e-10


def test_composite_rejects_mismatched_profile(cos_steady, asym_corr):
    with pytest.raises(ValueError):
        compose(cos_steady, asym_corr)


def test_flags_report_active_terms():
    assert CompositeFlags.tilde().active() == ("boundary_layer", "interface", "chi_c")
    assert CompositeFlags.none().active() == ()


def test_sample_grid_writes_rows(tmp_path):
    sample_grid(tmp_path / "g.csv", poiseuille(0.0, -1.0), 3, 4)
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,u1,u2,p"
    assert len(lines) == 13
