"""Stationary rough-channel flow driven by a pressure drop.

The Navier-Stokes problem is solved by Picard iteration: each step solves an
Oseen problem whose convection is frozen at the previous iterate. Stokes mode
performs a single linear solve.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .discretization import (
    Constraint,
    MixedField,
    MixedSpace,
    NormOperators,
    SaddleSolver,
    SolverError,
    _vertical_edge_rule,
    assemble,
    boundary_pressure_load,
    build_space,
    convection_operator,
    q2_reference,
)
from .geometry import BoundaryProfile, ChannelMesh, Grading, MeshError, _check_inverse_integer, build_channel_mesh

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    NAVIER_STOKES = "navier_stokes"
    STOKES = "stokes"


@dataclass(frozen=True)
class FlowCase:
    p0: float
    p1: float
    eps: float
    profile: BoundaryProfile
    mode: Mode = Mode.STOKES

    def __post_init__(self):
        _check_inverse_integer(self.eps)
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def drop(self) -> float:
        """``p1 - p0``."""
        return self.p1 - self.p0

    @property
    def wall_shear(self) -> float:
        """``d U_0,1 / d x2`` at ``x2 = 0`` for the Poiseuille profile."""
        return -0.5 * self.drop


@dataclass(frozen=True)
class MeshOptions:
    """Channel resolution policy: fixed cells per period, graded vertical rows."""

    cells_per_period: int = 32
    ny: int = 44
    grading: Grading = field(default_factory=Grading)

    def build(self, profile: BoundaryProfile, eps: float) -> ChannelMesh:
        periods = _check_inverse_integer(eps)
        return build_channel_mesh(profile, eps, self.cells_per_period * periods, self.ny, self.grading)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iters: int = 50
    damping: float = 1.0
    smallness: float = 1.0
    growth_limit: int = 3

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")


def channel_space(mesh: ChannelMesh) -> MixedSpace:
    """No-slip on the rough bottom and the lid, zero normal velocity on the sides."""
    return build_space(
        mesh,
        [
            Constraint("GammaEps"),
            Constraint("Gamma1"),
            Constraint("Sigma0", (1,)),
            Constraint("Sigma1", (1,)),
        ],
    )


def side_flux(field: MixedField, side: int) -> float:
    """``int u_1 dx2`` over the left (0) or right (1) side of the channel."""
    mesh = field.space.mesh
    rows = np.arange(mesh.ny)
    cells, xi, wds = _vertical_edge_rule(mesh, side, rows)
    val, _ = q2_reference(xi)
    un = field.velocity_nodes[field.space.node_map[mesh.cells[cells]], 0]
    return float(np.einsum("cq,qa,ca->", wds, val, un))


@dataclass(eq=False)
class SteadySolution:
    case: FlowCase
    mesh: ChannelMesh
    field: MixedField
    history: list[float]
    residuals: list[float]

    @property
    def space(self) -> MixedSpace:
        return self.field.space

    @cached_property
    def norms(self) -> NormOperators:
        return NormOperators(self.space)

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def flux(self) -> float:
        return side_flux(self.field, 1)

    @property
    def divergence(self) -> float:
        return self.norms.divergence_metric(self.field.u)


def solve_steady(
    case: FlowCase,
    mesh_opts: MeshOptions | None = None,
    solver_opts: SolverOptions | None = None,
    mesh: ChannelMesh | None = None,
) -> SteadySolution:
    """Picard/Oseen iteration for the pressure-driven channel problem."""
    opts = solver_opts or SolverOptions()
    if mesh is None:
        mesh = (mesh_opts or MeshOptions()).build(case.profile, case.eps)
    elif abs(mesh.epsilon - case.eps) > 1e-15 or mesh.profile.digest() != case.profile.digest():
        raise MeshError("mesh does not match the flow case")
    space = channel_space(mesh)
    system = assemble(space)
    f = boundary_pressure_load(space, case.p0, case.p1)

    if case.mode is Mode.STOKES:
        sol = SaddleSolver(space, system.A, system.B, rtol=opts.tol).solve(f)
        return SteadySolution(case, mesh, sol, [0.0], [])

    if abs(case.drop) > opts.smallness:
        warnings.warn(
            f"|p1 - p0| = {abs(case.drop):g} exceeds the small-data threshold {opts.smallness:g}",
            RuntimeWarning,
            stacklevel=2,
        )
    norms = NormOperators(space)
    current = SaddleSolver(space, system.A, system.B, rtol=opts.tol).solve(f)
    history: list[float] = []
    residuals: list[float] = []
    growth = 0
    for it in range(opts.max_iters):
        K = system.A + convection_operator(space, current.u)
        new = SaddleSolver(space, K, system.B, rtol=opts.tol).solve(f)
        if opts.damping < 1.0:
            new = MixedField(space, current.u + opts.damping * (new.u - current.u), current.p + opts.damping * (new.p - current.p))
        step = norms.h1(new.u - current.u)
        scale = norms.h1(new.u)
        rel = step / scale if scale > 0 else 0.0
        history.append(rel)
        Kn = system.A + convection_operator(space, new.u)
        r = (Kn @ new.u + system.B.T @ new.p - f)[space.free]
        residuals.append(float(np.linalg.norm(r)))
        logger.debug("picard %d: relative H1 update %.3e", it + 1, rel)
        current = new
        if rel <= opts.tol:
            return SteadySolution(case, mesh, current, history, residuals)
        growth = growth + 1 if len(history) > 1 and history[-1] > history[-2] else 0
        if growth >= opts.growth_limit:
            raise SolverError(f"Picard iterates diverge (update grew {growth} times in a row)", history)
    raise SolverError(f"Picard iteration did not converge in {opts.max_iters} steps", history)


def perturbation_field(sol: SteadySolution) -> MixedField:
    """Interpolant of ``U_eps - U_0`` with Poiseuille extended by zero below ``x2 = 0``."""
    from .fields import poiseuille

    U0 = poiseuille(sol.case.p0, sol.case.p1)
    space = sol.space
    u0 = U0.velocity(space.node_coords).T.ravel()
    p0 = U0.pressure(space.pressure_coords)
    return MixedField(space, sol.field.u - u0, sol.field.p - p0)


def write_field(path, field: MixedField, header: dict | None = None) -> None:
    """Plain-text field file: header, per-node velocity, per-vertex pressure."""
    space = field.space
    xy = space.node_coords
    pxy = space.pressure_coords
    vel = field.velocity_nodes
    with open(path, "w") as fh:
        fh.write(f"# mesh {space.mesh.digest()}\n")
        for k, v in (header or {}).items():
            fh.write(f"# {k} {v}\n")
        fh.write(f"velocity {space.n_vn}\n")
        for k in range(space.n_vn):
            fh.write(f"{k} {xy[k, 0]:.17g} {xy[k, 1]:.17g} {vel[k, 0]:.17g} {vel[k, 1]:.17g}\n")
        fh.write(f"pressure {space.n_p}\n")
        for k in range(space.n_p):
            fh.write(f"{k} {pxy[k, 0]:.17g} {pxy[k, 1]:.17g} {field.p[k]:.17g}\n")


def read_field(path, space: MixedSpace) -> MixedField:
    """Inverse of :func:`write_field`; the mesh digest must match ``space``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    digest = lines[0].split()[2]
    if digest != space.mesh.digest():
        raise ValueError(f"field file mesh {digest} does not match {space.mesh.digest()}")
    i = next(k for k, line in enumerate(lines) if line.startswith("velocity "))
    n = int(lines[i].split()[1])
    vel = np.loadtxt(lines[i + 1 : i + 1 + n], ndmin=2)[:, 3:5]
    j = i + 1 + n
    m = int(lines[j].split()[1])
    p = np.loadtxt(lines[j + 1 : j + 1 + m], ndmin=2)[:, 3]
    return MixedField(space, vel.T.ravel().copy(), p.copy())
