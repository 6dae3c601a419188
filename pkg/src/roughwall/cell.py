"""Boundary-layer cell corrector on a truncated periodic strip.

The corrector ``V`` solves Stokes in ``{eta(y1) < y2 < H}``, periodic in
``y1``, with ``V = (-y2, 0)`` on the bottom curve. At ``y2 = H`` the normal
component vanishes and the tangential traction is zero (natural condition).
Its tail constant ``alpha_1`` is the mean of ``V_1`` over the top edge.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .discretization import (
    Constraint,
    MixedField,
    MixedSpace,
    SaddleSolver,
    SolverError,
    assemble,
    build_space,
    horizontal_edge_rule,
    lagrange2,
    lagrange2_dd,
    q2_reference,
)
from .geometry import BoundaryProfile, Grading, StripMesh, build_strip_mesh

logger = logging.getLogger(__name__)

DECAY_FLOOR = 1e-12


@dataclass(frozen=True)
class CellResolution:
    """Strip resolution. With ``ny=None`` the outer rows follow a growth rule,
    so strips of different heights share their lower rows exactly."""

    nx: int = 32
    ny: int | None = None
    grading: Grading = field(default_factory=lambda: Grading(n_rough=4, n_wall=16, wall_height=2.0, growth=1.25, cap=0.5))

    def build(self, profile: BoundaryProfile, H: float) -> StripMesh:
        return build_strip_mesh(profile, H, self.nx, self.ny, self.grading)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r2: float
    levels: np.ndarray
    identically_small: bool = False


@dataclass(eq=False)
class CellCorrector:
    mesh: StripMesh
    field: MixedField
    alpha1: float

    @property
    def H(self) -> float:
        return self.mesh.top

    @property
    def profile(self) -> BoundaryProfile:
        return self.mesh.profile

    @property
    def space(self) -> MixedSpace:
        return self.field.space

    @property
    def alpha(self) -> np.ndarray:
        return np.array([self.alpha1, 0.0])

    # ---- diagnostics
    @cached_property
    def decay_table(self) -> np.ndarray:
        """Rows ``(y2, sup|V - alpha|, sup|grad V|, sup|Pi|)`` at integer levels 1..H-1."""
        levels = np.arange(1.0, math.floor(self.H - 1e-9) + 0.5)
        levels = levels[levels < self.H]
        n = 8 * self.mesh.nx
        y1 = (np.arange(n) + 0.5) / n
        rows = []
        for y2 in levels:
            pts = np.column_stack([y1, np.full(n, y2)])
            u, g, p = self.field.evaluate(pts)
            rows.append(
                (
                    y2,
                    np.linalg.norm(u - self.alpha, axis=1).max(),
                    np.sqrt(np.einsum("nij,nij->n", g, g)).max(),
                    np.abs(p).max(),
                )
            )
        return np.array(rows).reshape(-1, 4)

    def monotone_decay(self, tol: float = 0.05) -> bool:
        """Sup-values nonincreasing in y2 (within ``tol``) wherever above the floor."""
        t = self.decay_table
        for col in (1, 2, 3):
            v = t[:, col]
            for a, b in zip(v[:-1], v[1:]):
                if b > DECAY_FLOOR and b > (1.0 + tol) * a:
                    return False
        return True

    def lp_table(self, ps=(1, 2)) -> dict[int, tuple[float, float, float]]:
        """``p -> (int |V-alpha|^p, int |grad V|^p, int |Pi|^p)`` over the strip."""
        qd = self.space.quad
        u, g, p = self.field.at_quadrature(qd)
        du = np.linalg.norm(u - self.alpha, axis=-1)
        dg = np.sqrt(np.einsum("cqij,cqij->cq", g, g))
        out = {}
        for q in ps:
            out[q] = tuple(float(np.sum(qd.wdet * np.abs(v) ** q)) for v in (du, dg, p))
        return out

    # ---- seam traces
    def seam_trace(self, y2: np.ndarray):
        """``V2``, ``d2 V2`` and ``d2^2 V2`` along the periodic seam ``y1 = 0``.

        The trace only involves seam nodes, which are shared by both sides,
        so it is single valued. Levels must lie in ``[0, H]``.
        """
        y2 = np.asarray(y2, dtype=float)
        mesh = self.mesh
        if np.any(y2 < -1e-14) or np.any(y2 > self.H + 1e-12):
            raise ValueError("seam traces are available for 0 <= y2 <= H only")
        lines = mesh.row_lines(np.zeros(1))[0]
        j0 = mesh.n_rough
        j = np.clip(np.searchsorted(lines, y2, side="right") - 1, j0, mesh.ny - 1)
        lo, hi = lines[j], lines[j + 1]
        t = (y2 - lo) / (hi - lo)
        val, der = lagrange2(t)
        dd = lagrange2_dd()
        # seam nodes of column 0: local indices 0, 3, 6 (a = 0, b = 0..2)
        local = mesh.cells[j * mesh.nx][:, [0, 3, 6]]
        v2 = self.field.velocity_nodes[self.space.node_map[local], 1]
        dz = hi - lo
        return (
            np.einsum("nb,nb->n", val, v2),
            np.einsum("nb,nb->n", der, v2) / dz,
            (v2 @ dd) / dz**2,
        )

    # ---- scaled evaluation
    def evaluate_scaled(self, x: np.ndarray, eps: float, gradient: bool = False):
        """``V(x/eps)`` (and ``grad_y V`` at ``x/eps``); the tail ``alpha`` above ``y2 = H``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x / eps
        u = np.tile(self.alpha, (len(y), 1))
        g = np.zeros((len(y), 2, 2))
        inside = y[:, 1] < self.H
        if np.any(inside):
            yy = y[inside].copy()
            yy[:, 0] = np.mod(yy[:, 0], 1.0)
            cells, _ = self.mesh.locate(yy)
            if np.any(cells < 0):
                raise ValueError("point below the rough boundary")
            ui, gi, _ = self.field.evaluate(yy, gradient=gradient)
            u[inside] = ui
            if gradient:
                g[inside] = gi
        return (u, g) if gradient else u


def _bottom_data(y: np.ndarray) -> np.ndarray:
    return np.column_stack([-y[:, 1], np.zeros(len(y))])


def cell_space(mesh: StripMesh) -> MixedSpace:
    return build_space(mesh, [Constraint("Bottom", (0, 1), _bottom_data), Constraint("Top", (1,))], gauge="top_mean")


def top_average(field: MixedField) -> float:
    mesh = field.space.mesh
    cells, xi, wds = horizontal_edge_rule(mesh, mesh.ny)
    val, _ = q2_reference(xi)
    un = field.velocity_nodes[field.space.node_map[mesh.cells[cells]], 0]
    return float(np.einsum("cq,qa,ca->", wds, val, un) / mesh.width)


def solve_cell(profile: BoundaryProfile, H: float = 10.0, resolution: CellResolution | None = None) -> CellCorrector:
    """Solve the truncated cell problem and read off ``alpha_1``."""
    mesh = (resolution or CellResolution()).build(profile, H)
    space = cell_space(mesh)
    system = assemble(space)
    sol = SaddleSolver(space, system.A, system.B).solve(np.zeros(space.n_u))
    corr = CellCorrector(mesh, sol, top_average(sol))
    logger.debug("cell H=%g alpha1=%.15g", H, corr.alpha1)
    return corr


def decay_fit(corr: CellCorrector) -> DecayFit:
    """Exponential rate of ``sup |grad V|`` over the tabulated levels."""
    t = corr.decay_table
    keep = t[:, 2] > DECAY_FLOOR
    if keep.sum() == 0:
        return DecayFit(math.inf, 1.0, t[:0, 0], identically_small=True)
    if keep.sum() < 2:
        raise SolverError("fewer than two decay levels above the floor")
    y = t[keep, 0]
    z = np.log(t[keep, 2])
    slope, icpt = np.polyfit(y, z, 1)
    fit = slope * y + icpt
    ss = np.sum((z - z.mean()) ** 2)
    r2 = 1.0 - np.sum((z - fit) ** 2) / ss if ss > 0 else 1.0
    return DecayFit(max(-slope, 0.0), float(r2), y)


@dataclass(frozen=True)
class AlphaStability:
    H: tuple[float, ...]
    alpha1: tuple[float, ...]
    differences: tuple[float, ...]
    extrapolated: float


def alpha_stability(profile: BoundaryProfile, H_list, resolution: CellResolution | None = None, floor: float = 1e-12) -> AlphaStability:
    """``alpha_1(H)`` over increasing heights; successive differences must shrink.

    Differences below ``floor`` count as converged.
    """
    H_list = tuple(float(h) for h in H_list)
    if len(H_list) < 2 or any(b <= a for a, b in zip(H_list[:-1], H_list[1:])):
        raise ValueError("H_list must be increasing with at least two entries")
    alphas = tuple(solve_cell(profile, H, resolution).alpha1 for H in H_list)
    diffs = tuple(abs(b - a) for a, b in zip(alphas[:-1], alphas[1:]))
    for a, b in zip(diffs[:-1], diffs[1:]):
        if b > floor and b >= a:
            raise SolverError(f"alpha_1 differences do not decrease ({a:.3e} -> {b:.3e}); refine the strip", list(diffs))
    extrap = alphas[-1]
    if len(diffs) >= 2 and diffs[-2] > floor and diffs[-1] > floor:
        r = diffs[-1] / diffs[-2]
        extrap = alphas[-1] + (alphas[-1] - alphas[-2]) * r / (1.0 - r)
    return AlphaStability(H_list, alphas, diffs, extrap)


def write_summary(path, corr: CellCorrector, fit: DecayFit | None = None) -> None:
    """Corrector summary CSV: header block, then the decay table."""
    fit = fit or decay_fit(corr)
    with open(path, "w") as fh:
        fh.write(f"# profile {corr.profile.descriptor()}\n")
        fh.write(f"# H {corr.H:.17g}\n")
        fh.write(f"# alpha1 {corr.alpha1:.17g}\n")
        rate = "inf" if math.isinf(fit.rate) else f"{fit.rate:.17g}"
        fh.write(f"# lambda_dec {rate}\n")
        fh.write(f"# lambda_dec_r2 {fit.r2:.17g}\n")
        fh.write("y2,sup_V_minus_alpha,sup_grad_V,sup_Pi\n")
        for row in corr.decay_table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
