"""Shared oracles and fixtures."""

import numpy as np
import pytest
from hypothesis import settings

from roughwall.analysis import NormKind, NormRequest, Region, _Difference, norm
from roughwall.discretization import Constraint, SaddleSolver, assemble, body_force_load, build_space
from roughwall.geometry import ProfileKind, ProfileSpec, build_unit_square_mesh, cosine_profile, make_profile

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

PI = np.pi


def mms_velocity(x):
    a, b = x[..., 0], x[..., 1]
    return np.stack([np.sin(PI * a) * np.sin(PI * b), np.cos(PI * a) * (np.cos(PI * b) - 1.0)], -1)


def mms_gradient(x):
    a, b = x[..., 0], x[..., 1]
    g = np.empty(x.shape[:-1] + (2, 2))
    g[..., 0, 0] = PI * np.cos(PI * a) * np.sin(PI * b)
    g[..., 0, 1] = PI * np.sin(PI * a) * np.cos(PI * b)
    g[..., 1, 0] = -PI * np.sin(PI * a) * (np.cos(PI * b) - 1.0)
    g[..., 1, 1] = -PI * np.cos(PI * a) * np.sin(PI * b)
    return g


def mms_force(x):
    """``-lap u + grad p`` with ``p = sin(pi x1) sin(pi x2)``."""
    a, b = x[..., 0], x[..., 1]
    return np.stack(
        [
            2 * PI**2 * np.sin(PI * a) * np.sin(PI * b) + PI * np.cos(PI * a) * np.sin(PI * b),
            2 * PI**2 * np.cos(PI * a) * np.cos(PI * b) - PI**2 * np.cos(PI * a) + PI * np.sin(PI * a) * np.cos(PI * b),
        ],
        -1,
    )


class _Exact:
    def __call__(self, x):
        return mms_velocity(x), mms_gradient(x), None


def mms_errors(n: int) -> tuple[float, float]:
    """L2 and H1-seminorm velocity errors of the manufactured Stokes problem on an n x n unit square."""
    mesh = build_unit_square_mesh(n)
    cons = [Constraint(tag, (0, 1), mms_velocity) for tag in ("GammaEps", "Gamma1", "Sigma0", "Sigma1")]
    space = build_space(mesh, cons, gauge="top_mean")
    system = assemble(space)
    fld = SaddleSolver(space, system.A, system.B).solve(body_force_load(space, mms_force))
    diff = _Difference(fld, _Exact())
    return (
        norm(NormRequest(diff, Region.OMEGA_EPS, NormKind.L2), mesh),
        norm(NormRequest(diff, Region.OMEGA_EPS, NormKind.H1SEMI), mesh),
    )


def asymmetric_profile():
    """Sum of cosines with sine content, so the corrector is not mirror-symmetric."""
    return make_profile(ProfileSpec(ProfileKind.SUM_OF_COSINES, cos_coeffs=(0.125,), sin_coeffs=(0.05, -0.025)))


@pytest.fixture(scope="session")
def cosine025():
    return cosine_profile(0.25)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
