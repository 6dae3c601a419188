import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roughwall.discretization import gauss_rule_2d
from roughwall.geometry import (
    Grading,
    MeshError,
    ProfileError,
    ProfileKind,
    ProfileSpec,
    build_channel_mesh,
    build_strip_mesh,
    build_unit_square_mesh,
    cosine_profile,
    make_profile,
)

Y = np.linspace(0.0, 1.0, 257)


def test_flat_profile_is_zero():
    p = make_profile(ProfileSpec())
    assert np.all(p.eval(Y) == 0.0)
    assert p.is_flat


def test_shifted_flat_is_constant_depth():
    p = make_profile(ProfileSpec(ProfileKind.SHIFTED_FLAT, amplitude=0.5))
    assert np.allclose(p.eval(Y), -0.5, atol=0, rtol=0)
    assert p.depth == pytest.approx(0.5)


def test_pinned_shifted_flat_touches_zero_at_integers_only():
    p = make_profile(ProfileSpec(ProfileKind.SHIFTED_FLAT, amplitude=0.5, pin_origin=True, collar=0.1))
    assert p.eval(0.0) == pytest.approx(0.0, abs=1e-14)
    assert p.eval(1.0) == pytest.approx(0.0, abs=1e-14)
    assert p.eval(0.5) == pytest.approx(-0.5)


def test_cosine_closed_form():
    p = cosine_profile(0.25)
    assert np.allclose(p.eval(Y), -0.125 * (1.0 - np.cos(2 * np.pi * Y)), atol=1e-15)
    assert np.allclose(p.deriv1(Y), -0.125 * 2 * np.pi * np.sin(2 * np.pi * Y), atol=1e-14)
    assert np.allclose(p.deriv2(Y), -0.125 * (2 * np.pi) ** 2 * np.cos(2 * np.pi * Y), atol=1e-13)


@pytest.mark.parametrize("a", [1.5, 2.5])
def test_amplitude_outside_band_rejected(a):
    with pytest.raises(ProfileError, match="below -1"):
        cosine_profile(a)


def test_profile_above_zero_rejected():
    with pytest.raises(ProfileError, match="above 0"):
        make_profile(ProfileSpec(ProfileKind.SUM_OF_COSINES, cos_coeffs=(0.1,), sin_coeffs=(0.2,)))


def test_rough_custom_samples_rejected():
    samples = [0.0, -0.5] * 8
    with pytest.raises(ProfileError, match="C\\^2"):
        make_profile(ProfileSpec(ProfileKind.CUSTOM_SAMPLES, samples=samples, curvature_limit=100.0))


def test_custom_samples_reproduce_smooth_profile():
    n = 64
    y = np.arange(n) / n
    ref = cosine_profile(0.25)
    p = make_profile(ProfileSpec(ProfileKind.CUSTOM_SAMPLES, samples=ref.eval(y), curvature_limit=100.0))
    assert np.max(np.abs(p.eval(Y) - ref.eval(Y))) < 1e-5


@given(a=st.floats(0.01, 1.0), y=st.floats(-3.0, 3.0))
def test_cosine_band_and_periodicity(a, y):
    p = cosine_profile(a)
    v = float(p.eval(y))
    assert -a - 1e-14 <= v <= 1e-14
    assert float(p.eval(y + 1.0)) == pytest.approx(v, abs=1e-12)


@given(s=st.floats(0.0, 0.99), y=st.floats(0.0, 1.0))
def test_shift_translates(s, y):
    p = cosine_profile(0.3)
    assert float(p.shifted(s).eval(y)) == pytest.approx(float(p.eval(y - s)), abs=1e-12)


@given(y=st.floats(0.0, 1.0))
def test_mirror_reflects(y):
    from conftest import asymmetric_profile

    p = asymmetric_profile()
    assert float(p.mirrored().eval(y)) == pytest.approx(float(p.eval(-y)), abs=1e-12)


def test_flat_mesh_is_unit_square():
    mesh = build_channel_mesh(make_profile(ProfileSpec()), 1 / 8, 64, 32)
    assert mesh.n_cells == 2048
    assert mesh.area() == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(mesh.nodes[mesh.tags["GammaEps"]][:, 1], 0.0)


def test_rough_mesh_area_and_interface_line(cosine025):
    eps = 1 / 8
    mesh = build_channel_mesh(cosine025, eps, 8 * 8, 32)
    # area = 1 + eps * mean depth = 1 + eps * a / 2
    assert mesh.area() == pytest.approx(1.0 + eps * 0.125, rel=1e-10)
    gamma0 = mesh.nodes[mesh.tags["Gamma0"]]
    assert np.allclose(gamma0[:, 1], 0.0, atol=1e-15)
    bottom = mesh.nodes[mesh.tags["GammaEps"]]
    assert np.allclose(bottom[:, 1], eps * cosine025.eval(bottom[:, 0] / eps), atol=1e-14)
    assert mesh.check_jacobian(gauss_rule_2d(3)[0]) > 0.0


def test_divisibility_checks(cosine025):
    build_channel_mesh(cosine025, 1 / 16, 64, 32)
    with pytest.raises(MeshError, match="below the minimum"):
        build_channel_mesh(cosine025, 1 / 16, 64, 32, min_cells_per_period=8)
    with pytest.raises(MeshError, match="multiple"):
        build_channel_mesh(cosine025, 1 / 16, 72, 32)
    with pytest.raises(MeshError, match="positive integer"):
        build_channel_mesh(cosine025, 0.3, 60, 32)


def test_channel_needs_eta_zero_at_origin():
    p = cosine_profile(0.25, phase=0.5)
    with pytest.raises(MeshError, match="eta\\(0\\) = 0"):
        build_channel_mesh(p, 1 / 8, 64, 32)


def test_strip_mesh_shape(cosine025):
    mesh = build_strip_mesh(cosine025, 10.0, 16, grading=Grading(4, 8, 2.0, growth=1.25, cap=0.5))
    assert mesh.top == 10.0
    assert mesh.periodic
    lines = mesh.row_lines(np.array([0.3]))
    assert np.all(np.diff(lines, axis=-1) > 0)


def test_unit_square_mesh_uniform():
    mesh = build_unit_square_mesh(4)
    assert mesh.n_cells == 16
    assert mesh.area() == pytest.approx(1.0)


@given(x1=st.floats(0.001, 0.999), t=st.floats(0.001, 0.999))
def test_locate_roundtrip(x1, t):
    mesh = build_channel_mesh(cosine_profile(0.25), 1 / 4, 16, 12)
    g = 0.25 * float(cosine_profile(0.25).eval(x1 / 0.25))
    x2 = g + t * (1.0 - g)
    cells, xi = mesh.locate(np.array([[x1, x2]]))
    assert cells[0] >= 0
    back, _ = mesh.map(cells, xi, shared=False)
    assert np.allclose(back[0], [x1, x2], atol=1e-10)
