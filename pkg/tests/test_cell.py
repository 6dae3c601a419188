import math

import numpy as np
import pytest

from conftest import asymmetric_profile
from roughwall.cell import CellResolution, alpha_stability, decay_fit, solve_cell, write_summary
from roughwall.geometry import Grading, ProfileKind, ProfileSpec, cosine_profile, make_profile

FAST = CellResolution(nx=16, grading=Grading(4, 16, 2.0, growth=1.25, cap=0.5))


@pytest.fixture(scope="module")
def cosine_corr(cosine025):
    return solve_cell(cosine025, 10.0, FAST)


def test_flat_has_no_slip():
    corr = solve_cell(make_profile(ProfileSpec()), 6.0, FAST)
    assert abs(corr.alpha1) <= 1e-10
    fit = decay_fit(corr)
    assert fit.identically_small
    assert math.isinf(fit.rate)


def test_shifted_flat_is_uniform_shift():
    corr = solve_cell(make_profile(ProfileSpec(ProfileKind.SHIFTED_FLAT, amplitude=0.5)), 6.0, FAST)
    assert corr.alpha1 == pytest.approx(0.5, abs=1e-8)
    pts = np.column_stack([np.linspace(0.05, 0.95, 9), np.linspace(-0.4, 5.5, 9)])
    u, _, _ = corr.field.evaluate(pts)
    assert np.allclose(u, [0.5, 0.0], atol=1e-8)


def test_small_amplitude_expansion():
    # eta = -b + b cos(2 pi y): alpha_1 = b - 2 pi b^2 + O(b^3)
    b = 0.005
    corr = solve_cell(cosine_profile(2 * b), 6.0, FAST)
    assert (b - corr.alpha1) / b**2 == pytest.approx(2 * math.pi, rel=0.05)


def test_cosine_slip_value(cosine_corr):
    # converged value at 32 cells per period is 0.0540644
    assert cosine_corr.alpha1 == pytest.approx(0.05406, abs=5e-5)
    assert 0.0 <= cosine_corr.alpha1 <= 0.25


def test_decay_is_exponential(cosine_corr):
    fit = decay_fit(cosine_corr)
    assert fit.rate >= 0.5
    assert fit.r2 >= 0.98
    assert cosine_corr.monotone_decay()


def test_tail_reached_at_top(cosine_corr):
    top = cosine_corr.decay_table[-1]
    assert top[1] < 1e-10


def test_phase_and_mirror_invariance():
    base = solve_cell(asymmetric_profile(), 6.0, FAST).alpha1
    # shifts by whole cells map the mesh onto itself, so the discrete problems coincide
    aligned = solve_cell(asymmetric_profile().shifted(5 / FAST.nx), 6.0, FAST).alpha1
    mirrored = solve_cell(asymmetric_profile().mirrored(), 6.0, FAST).alpha1
    assert aligned == pytest.approx(base, abs=1e-12)
    assert mirrored == pytest.approx(base, abs=1e-12)


def test_arbitrary_shift_within_discretization_error():
    base = solve_cell(asymmetric_profile(), 6.0, FAST).alpha1
    shifted = solve_cell(asymmetric_profile().shifted(0.37), 6.0, FAST).alpha1
    assert shifted == pytest.approx(base, abs=5e-5)


def test_alpha_stability_in_height(cosine025):
    stab = alpha_stability(cosine025, (6.0, 8.0, 10.0), FAST)
    assert stab.differences[-1] <= 1e-6
    assert stab.extrapolated == pytest.approx(stab.alpha1[-1], abs=1e-8)


def test_alpha_stability_rejects_unsorted(cosine025):
    with pytest.raises(ValueError):
        alpha_stability(cosine025, (8.0, 6.0), FAST)


def test_seam_trace_matches_field(cosine_corr):
    y2 = np.array([0.3, 1.7, 4.2])
    v2, _, _ = cosine_corr.seam_trace(y2)
    u, _, _ = cosine_corr.field.evaluate(np.column_stack([np.zeros(3), y2]))
    assert np.allclose(v2, u[:, 1], atol=1e-12)


def test_scaled_evaluation_is_periodic(cosine_corr):
    eps = 1 / 8
    x = np.array([[0.03, 0.02], [0.03 + eps, 0.02], [0.5, 2.0]])
    u = cosine_corr.evaluate_scaled(x, eps)
    assert np.allclose(u[0], u[1], atol=1e-12)
    assert np.allclose(u[2], cosine_corr.alpha)


def test_summary_csv_is_deterministic(tmp_path, cosine025, cosine_corr):
    write_summary(tmp_path / "a.csv", cosine_corr)
    write_summary(tmp_path / "b.csv", solve_cell(cosine025, 10.0, FAST))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()
    assert header[2].startswith("# alpha1 ")
    assert "y2,sup_V_minus_alpha,sup_grad_V,sup_Pi" in header
