import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import mms_errors
from roughwall.discretization import (
    Constraint,
    MixedField,
    NormOperators,
    SaddleSolver,
    SolverError,
    assemble,
    boundary_pressure_load,
    build_space,
    interpolate,
)
from roughwall.geometry import build_channel_mesh, build_unit_square_mesh, cosine_profile

ALL_SIDES = ("GammaEps", "Gamma1", "Sigma0", "Sigma1")


def test_dof_counts_two_by_two_square():
    mesh = build_unit_square_mesh(2)
    space = build_space(mesh, [Constraint(t) for t in ALL_SIDES])
    assert space.n_vn == 25
    assert space.free.size == 18
    assert space.n_p == 9


def test_mass_matrix_integrates_area(cosine025):
    mesh = build_channel_mesh(cosine025, 1 / 4, 16, 12)
    space = build_space(mesh, [])
    M = assemble(space, need_mass=True).M
    ones = np.concatenate([np.ones(space.n_vn), np.zeros(space.n_vn)])
    assert ones @ (M @ ones) == pytest.approx(mesh.area(), rel=1e-12)


def test_divergence_of_rigid_translation_vanishes(cosine025):
    mesh = build_channel_mesh(cosine025, 1 / 4, 16, 12)
    space = build_space(mesh, [])
    B = assemble(space).B
    u = np.concatenate([np.full(space.n_vn, 0.3), np.full(space.n_vn, -1.1)])
    assert np.max(np.abs(B @ u)) < 1e-13


@given(c=st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_quadratics_interpolated_exactly(c):
    mesh = build_unit_square_mesh(3)
    space = build_space(mesh, [])

    def vel(x):
        a, b = x[..., 0], x[..., 1]
        q = c[0] + c[1] * a + c[2] * b + c[3] * a * a + c[4] * a * b + c[5] * b * b
        return np.stack([q, -q], -1)

    fld = interpolate(space, vel)
    pts = np.array([[0.13, 0.71], [0.5, 0.5], [0.91, 0.07]])
    u, g, _ = fld.evaluate(pts)
    assert np.allclose(u, vel(pts), atol=1e-12)
    dq = np.array([c[1] + 2 * c[3] * pts[:, 0] + c[4] * pts[:, 1], c[2] + c[4] * pts[:, 0] + 2 * c[5] * pts[:, 1]]).T
    assert np.allclose(g[:, 0, :], dq, atol=1e-11)


def test_manufactured_solution_orders():
    errs = np.array([mms_errors(n) for n in (4, 8, 16)])
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders[:, 0] >= 2.7)
    assert np.all(orders[:, 1] >= 1.8)


def test_pressure_load_balances_drop():
    mesh = build_unit_square_mesh(4)
    space = build_space(mesh, [])
    f = boundary_pressure_load(space, 0.0, -1.0)
    # sum of the x-component load = p0 |Sigma0| - p1 |Sigma1| = 1
    assert f[: space.n_vn].sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(f[space.n_vn :] == 0.0)


def test_incompatible_divergence_data_raises():
    mesh = build_unit_square_mesh(2)
    space = build_space(mesh, [Constraint(t) for t in ALL_SIDES])
    system = assemble(space)
    # a net source inside a sealed box has no solution
    with pytest.raises(SolverError):
        SaddleSolver(space, system.A, system.B).solve(np.zeros(space.n_u), g_p=np.ones(space.n_p))


def test_norm_operators_on_linear_field():
    mesh = build_unit_square_mesh(4)
    space = build_space(mesh, [])
    fld = interpolate(space, lambda x: np.stack([x[..., 1], 0 * x[..., 1]], -1))
    ops = NormOperators(space)
    assert ops.l2(fld.u) == pytest.approx(np.sqrt(1 / 3), rel=1e-12)
    assert ops.h1_semi(fld.u) == pytest.approx(1.0, rel=1e-12)
    assert ops.divergence_metric(fld.u) < 1e-13


def test_field_subtraction_requires_same_space():
    a = MixedField.zeros(build_space(build_unit_square_mesh(2), []))
    assert np.all((a - a).u == 0.0)
