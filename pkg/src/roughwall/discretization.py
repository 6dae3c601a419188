"""Biquadratic/bilinear mixed finite elements on structured curvilinear meshes.

Velocity unknowns are ordered component-major over merged velocity nodes
(``u[c * n_vn + k]``); pressure unknowns follow the merged vertex numbering.
Constrained velocity entries are eliminated before the saddle-point solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import StructuredMesh

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Linear or nonlinear solve failure; carries diagnostic history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


# --------------------------------------------------------------------------- reference element


def gauss_rule_1d(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_rule_2d(n: int):
    x, w = gauss_rule_1d(n)
    X2, X1 = np.meshgrid(x, x, indexing="ij")
    W2, W1 = np.meshgrid(w, w, indexing="ij")
    return np.column_stack([X1.ravel(), X2.ravel()]), (W1 * W2).ravel()


def lagrange2(t):
    t = np.asarray(t, dtype=float)
    val = np.stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)], axis=-1)
    der = np.stack([4 * t - 3, 4 - 8 * t, 4 * t - 1], axis=-1)
    return val, der


def lagrange2_dd():
    return np.array([4.0, -8.0, 4.0])


def q2_reference(xi):
    """Values (..., 9) and reference gradients (..., 9, 2) of the Q2 basis."""
    la, da = lagrange2(xi[..., 0])
    lb, db = lagrange2(xi[..., 1])
    val = (lb[..., :, None] * la[..., None, :]).reshape(*xi.shape[:-1], 9)
    g1 = (lb[..., :, None] * da[..., None, :]).reshape(*xi.shape[:-1], 9)
    g2 = (db[..., :, None] * la[..., None, :]).reshape(*xi.shape[:-1], 9)
    return val, np.stack([g1, g2], axis=-1)


def q1_reference(xi):
    s, t = xi[..., 0], xi[..., 1]
    return np.stack([(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t], axis=-1)


def physical_gradients(mesh: StructuredMesh, cells, xi, shared: bool = False):
    """Q2 values, physical gradients, coordinates and det J.

    ``xi`` is either one point per cell (n, 2) or a shared rule (q, 2); the
    latter yields arrays with a leading (cells, q) shape.
    """
    x, (h, j21, j22) = mesh.map(cells, xi, shared=shared)
    val, ref = q2_reference(xi)
    safe = np.where(np.abs(j22) > 0, j22, 1e-300)
    gx1 = ref[..., 0] / h[..., None] - ref[..., 1] * (j21 / (h * safe))[..., None]
    gx2 = ref[..., 1] / safe[..., None]
    return val, np.stack([gx1, gx2], axis=-1), x, h * j22


@dataclass(eq=False)
class QuadratureData:
    """Tabulated 3x3 Gauss data on a subset of cells."""

    mesh: StructuredMesh
    cells: np.ndarray
    xi: np.ndarray
    weights: np.ndarray
    N: np.ndarray
    G: np.ndarray
    x: np.ndarray
    wdet: np.ndarray
    Q: np.ndarray

    @classmethod
    def build(cls, mesh: StructuredMesh, cells=None, order: int = 3) -> "QuadratureData":
        cells = np.arange(mesh.n_cells) if cells is None else np.asarray(cells)
        xi, w = gauss_rule_2d(order)
        N, G, x, det = physical_gradients(mesh, cells, xi, shared=True)
        if det.size and not np.all(det > 0):
            raise SolverError("nonpositive Jacobian at a quadrature point")
        return cls(mesh, cells, xi, w, N, G, x, det * w[None, :], q1_reference(xi))


# --------------------------------------------------------------------------- spaces


@dataclass(frozen=True)
class Constraint:
    """Dirichlet data on a tagged node set for selected velocity components.

    ``value`` maps node coordinates (n, 2) to prescribed values (n, len(components));
    ``None`` means zero.
    """

    tag: str
    components: tuple[int, ...] = (0, 1)
    value: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(eq=False)
class MixedSpace:
    mesh: StructuredMesh
    node_map: np.ndarray
    n_vn: int
    vertex_map: np.ndarray
    n_p: int
    fixed: np.ndarray
    fixed_values: np.ndarray
    owner: np.ndarray
    constraints: tuple[Constraint, ...]
    gauge: str = "none"

    @property
    def n_u(self) -> int:
        return 2 * self.n_vn

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        return self.node_map[self.mesh.cells]

    @cached_property
    def cell_pdofs(self) -> np.ndarray:
        return self.vertex_map[self.mesh.cell_vertices]

    @cached_property
    def quad(self) -> QuadratureData:
        return QuadratureData.build(self.mesh)

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Coordinates of merged velocity nodes (first raw representative)."""
        xy = np.empty((self.n_vn, 2))
        xy[self.node_map[::-1]] = self.mesh.nodes[::-1]
        return xy

    @cached_property
    def pressure_coords(self) -> np.ndarray:
        xy = np.empty((self.n_p, 2))
        raw = self.mesh.nodes[self.mesh.vertex_to_node]
        xy[self.vertex_map[::-1]] = raw[::-1]
        return xy

    def tag_dofs(self, tag: str, component: int) -> np.ndarray:
        return component * self.n_vn + np.unique(self.node_map[self.mesh.tags[tag]])


def _merge(n_raw: int, pairs: np.ndarray) -> tuple[np.ndarray, int]:
    target = np.arange(n_raw)
    if len(pairs):
        target[pairs[:, 0]] = pairs[:, 1]
    keep = np.unique(target)
    renum = np.full(n_raw, -1)
    renum[keep] = np.arange(keep.size)
    return renum[target], keep.size


def build_space(mesh: StructuredMesh, constraints: Sequence[Constraint], gauge: str = "none") -> MixedSpace:
    """Number velocity/pressure unknowns and resolve constraints.

    Periodic strips merge right-column nodes into the left column. Among
    Dirichlet sets, the first listed constraint owns a shared degree of
    freedom; Dirichlet data always wins over periodic identification.
    """
    node_map, n_vn = _merge(mesh.nodes.shape[0], mesh.periodic_pairs)
    vpairs = np.zeros((0, 2), dtype=int)
    if mesh.periodic:
        jj = np.arange(mesh.ny + 1)
        vpairs = np.column_stack([jj * (mesh.nx + 1) + mesh.nx, jj * (mesh.nx + 1)])
    vertex_map, n_p = _merge((mesh.nx + 1) * (mesh.ny + 1), vpairs)

    fixed = np.zeros(2 * n_vn, dtype=bool)
    values = np.zeros(2 * n_vn)
    owner = np.full(2 * n_vn, -1)
    for ci, con in enumerate(constraints):
        if con.tag not in mesh.tags:
            raise KeyError(f"unknown boundary tag {con.tag!r}; mesh has {sorted(mesh.tags)}")
        raw = mesh.tags[con.tag]
        merged = node_map[raw]
        vals = None
        if con.value is not None:
            vals = np.asarray(con.value(mesh.nodes[raw]), dtype=float).reshape(len(raw), len(con.components))
        for k, comp in enumerate(con.components):
            dofs = comp * n_vn + merged
            new = owner[dofs] < 0
            owner[dofs[new]] = ci
            fixed[dofs[new]] = True
            if vals is not None:
                values[dofs[new]] = vals[new, k]
    return MixedSpace(mesh, node_map, n_vn, vertex_map, n_p, fixed, values, owner, tuple(constraints), gauge)


# --------------------------------------------------------------------------- assembly


@dataclass(eq=False)
class AssembledSystem:
    """Global operators on the full (unconstrained) velocity/pressure numbering."""

    space: MixedSpace
    A: sp.csr_matrix
    B: sp.csr_matrix
    M: sp.csr_matrix | None = None
    N: sp.csr_matrix | None = None
    f: np.ndarray | None = None

    def dump(self, path, which: str = "A") -> None:
        """Write an operator in coordinate (row col value) text format."""
        mat = getattr(self, which).tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {which} shape {mat.shape[0]} {mat.shape[1]} nnz {mat.nnz}\n")
            for r, c, v in zip(mat.row, mat.col, mat.data):
                fh.write(f"{r} {c} {v:.17g}\n")


def _scatter(rows_local, cols_local, data, shape):
    rows = np.broadcast_to(rows_local[:, :, None], data.shape).ravel()
    cols = np.broadcast_to(cols_local[:, None, :], data.shape).ravel()
    return sp.coo_matrix((data.ravel(), (rows, cols)), shape=shape).tocsr()


def _vector_block(S: sp.spmatrix) -> sp.csr_matrix:
    return sp.block_diag([S, S], format="csr")


def scalar_stiffness(space: MixedSpace) -> sp.csr_matrix:
    qd = space.quad
    Ke = np.einsum("cq,cqai,cqbi->cab", qd.wdet, qd.G, qd.G, optimize=True)
    d = space.cell_dofs
    return _scatter(d, d, Ke, (space.n_vn, space.n_vn))


def scalar_mass(space: MixedSpace) -> sp.csr_matrix:
    qd = space.quad
    Me = np.einsum("cq,qa,qb->cab", qd.wdet, qd.N, qd.N, optimize=True)
    d = space.cell_dofs
    return _scatter(d, d, Me, (space.n_vn, space.n_vn))


def pressure_mass(space: MixedSpace) -> sp.csr_matrix:
    qd = space.quad
    Me = np.einsum("cq,qa,qb->cab", qd.wdet, qd.Q, qd.Q, optimize=True)
    d = space.cell_pdofs
    return _scatter(d, d, Me, (space.n_p, space.n_p))


def divergence_operator(space: MixedSpace) -> sp.csr_matrix:
    qd = space.quad
    blocks = []
    for comp in range(2):
        Be = -np.einsum("cq,qk,cqb->ckb", qd.wdet, qd.Q, qd.G[..., comp], optimize=True)
        blocks.append(_scatter(space.cell_pdofs, space.cell_dofs, Be, (space.n_p, space.n_vn)))
    return sp.hstack(blocks, format="csr")


def convection_operator(space: MixedSpace, w: np.ndarray) -> sp.csr_matrix:
    """``N(w)_ij = int (w . grad phi_j) . phi_i`` for a nodal velocity vector ``w``."""
    qd = space.quad
    wn = w.reshape(2, space.n_vn).T[space.cell_dofs]  # (c, 9, 2)
    wq = np.einsum("qa,cai->cqi", qd.N, wn, optimize=True)
    adv = np.einsum("cqi,cqbi->cqb", wq, qd.G, optimize=True)
    Ce = np.einsum("cq,qa,cqb->cab", qd.wdet, qd.N, adv, optimize=True)
    return _vector_block(_scatter(space.cell_dofs, space.cell_dofs, Ce, (space.n_vn, space.n_vn)))


def body_force_load(space: MixedSpace, force: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``int f . phi_i`` for a body force given pointwise, f(x) -> (..., 2)."""
    qd = space.quad
    fq = force(qd.x)
    out = np.zeros(space.n_u)
    for comp in range(2):
        fe = np.einsum("cq,qa,cq->ca", qd.wdet, qd.N, fq[..., comp], optimize=True)
        np.add.at(out, comp * space.n_vn + space.cell_dofs.ravel(), fe.ravel())
    return out


def assemble(space: MixedSpace, advecting_field: "MixedField | None" = None, need_mass: bool = False) -> AssembledSystem:
    """Viscous, divergence and (optionally) mass and convection operators."""
    A = _vector_block(scalar_stiffness(space))
    B = divergence_operator(space)
    M = _vector_block(scalar_mass(space)) if need_mass else None
    N = None
    if advecting_field is not None:
        if advecting_field.space is not space:
            raise ValueError("advecting field lives on a different space")
        N = convection_operator(space, advecting_field.u)
    return AssembledSystem(space, A, B, M, N, np.zeros(space.n_u))


def _vertical_edge_rule(mesh: StructuredMesh, side: int, rows: np.ndarray, order: int = 3):
    """Cells, 1D weights * |dx/dxi2| and reference points on a left/right edge."""
    t, w = gauss_rule_1d(order)
    col = 0 if side == 0 else mesh.nx - 1
    cells = rows * mesh.nx + col
    xi = np.column_stack([np.full_like(t, float(side)), t])
    _, (_, _, j22) = mesh.map(cells, xi, shared=True)
    return cells, xi, np.abs(j22) * w[None, :]


def horizontal_edge_rule(mesh: StructuredMesh, line: int, order: int = 3):
    """Cells, reference points and ds-weights along horizontal mesh line ``line``."""
    t, w = gauss_rule_1d(order)
    if line < mesh.ny:
        rows, s = line, 0.0
    else:
        rows, s = mesh.ny - 1, 1.0
    cells = rows * mesh.nx + np.arange(mesh.nx)
    xi = np.column_stack([t, np.full_like(t, s)])
    _, (h, j21, _) = mesh.map(cells, xi, shared=True)
    return cells, xi, np.sqrt(h * h + j21 * j21) * w[None, :]


def boundary_pressure_load(space: MixedSpace, p0: float, p1: float) -> np.ndarray:
    """Load ``f(phi) = p0 int_Sigma0 phi_1 - p1 int_Sigma1 phi_1``."""
    mesh = space.mesh
    if "Sigma0" not in mesh.tags:
        raise KeyError("mesh has no Sigma0/Sigma1 tags")
    f = np.zeros(space.n_u)
    rows = np.arange(mesh.n_rough, mesh.ny)
    for side, p in ((0, p0), (1, -p1)):
        cells, xi, wds = _vertical_edge_rule(mesh, side, rows)
        val, _ = q2_reference(xi)
        fe = p * np.einsum("cq,qa->ca", wds, val)
        np.add.at(f, space.cell_dofs[cells].ravel(), fe.ravel())
    return f


# --------------------------------------------------------------------------- fields


@dataclass(eq=False)
class MixedField:
    space: MixedSpace
    u: np.ndarray
    p: np.ndarray

    @classmethod
    def zeros(cls, space: MixedSpace) -> "MixedField":
        return cls(space, space.fixed_values.copy(), np.zeros(space.n_p))

    @property
    def velocity_nodes(self) -> np.ndarray:
        return self.u.reshape(2, self.space.n_vn).T

    def copy(self) -> "MixedField":
        return MixedField(self.space, self.u.copy(), self.p.copy())

    def __sub__(self, other: "MixedField") -> "MixedField":
        return MixedField(self.space, self.u - other.u, self.p - other.p)

    def at_quadrature(self, qd: QuadratureData):
        """Velocity (c, q, 2), gradient (c, q, 2, 2) with ``[..., i, j] = d_j u_i``, pressure (c, q)."""
        s = self.space
        un = self.velocity_nodes[s.node_map[s.mesh.cells[qd.cells]]]  # (c, 9, 2)
        u = np.einsum("qa,cai->cqi", qd.N, un, optimize=True)
        g = np.einsum("cqaj,cai->cqij", qd.G, un, optimize=True)
        pn = self.p[s.vertex_map[s.mesh.cell_vertices[qd.cells]]]
        p = np.einsum("qk,ck->cq", qd.Q, pn)
        return u, g, p

    def evaluate(self, pts: np.ndarray, gradient: bool = True):
        """Point values (n, 2), gradients (n, 2, 2) and pressure (n,).

        Points outside the mesh raise ``ValueError``.
        """
        s = self.space
        mesh = s.mesh
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cells, xi = mesh.locate(pts)
        if np.any(cells < 0):
            bad = pts[cells < 0][0]
            raise ValueError(f"point {bad.tolist()} lies outside the {mesh.kind} mesh")
        N, G, _, _ = physical_gradients(mesh, cells, xi)
        un = self.velocity_nodes[s.node_map[mesh.cells[cells]]]
        u = np.einsum("na,nai->ni", N, un)
        pn = self.p[s.vertex_map[mesh.cell_vertices[cells]]]
        p = np.einsum("nk,nk->n", q1_reference(xi), pn)
        if not gradient:
            return u, None, p
        g = np.einsum("naj,nai->nij", G, un)
        return u, g, p


def interpolate(space: MixedSpace, velocity: Callable[[np.ndarray], np.ndarray], pressure=None) -> MixedField:
    """Nodal interpolant; constrained entries keep their prescribed values."""
    uv = np.asarray(velocity(space.node_coords), dtype=float).reshape(space.n_vn, 2)
    u = uv.T.ravel().copy()
    u[space.fixed] = space.fixed_values[space.fixed]
    p = np.zeros(space.n_p) if pressure is None else np.asarray(pressure(space.pressure_coords), dtype=float)
    return MixedField(space, u, p)


# --------------------------------------------------------------------------- solver


def _top_mean_vector(space: MixedSpace) -> np.ndarray:
    mesh = space.mesh
    cells, xi, wds = horizontal_edge_rule(mesh, mesh.ny)
    q = q1_reference(xi)
    m = np.zeros(space.n_p)
    np.add.at(m, space.cell_pdofs[cells].ravel(), np.einsum("cq,qk->ck", wds, q).ravel())
    return m


class SaddleSolver:
    """Sparse LU of ``[[K, B^T], [B, 0]]`` restricted to free velocity unknowns.

    ``K`` is the velocity block (viscous plus any mass/convection terms).
    With ``space.gauge == 'top_mean'`` the pressure mean over the top edge
    is fixed to zero through a bordering multiplier.
    """

    def __init__(self, space: MixedSpace, K: sp.spmatrix, B: sp.spmatrix, rtol: float = 1e-10):
        self.space = space
        self.rtol = rtol
        free = space.free
        self.free = free
        Kf = K.tocsr()
        self.K_fc = Kf[free][:, space.fixed]
        self.B_c = B.tocsc()[:, space.fixed]
        Bf = B.tocsc()[:, free]
        blocks = [[Kf[free][:, free], Bf.T], [Bf, None]]
        self.n_extra = 0
        if space.gauge == "top_mean":
            m = _top_mean_vector(space)
            blocks = [
                [Kf[free][:, free], Bf.T, None],
                [Bf, None, sp.csr_matrix(m[:, None])],
                [None, sp.csr_matrix(m[None, :]), None],
            ]
            self.n_extra = 1
        self.matrix = sp.bmat(blocks, format="csc")
        try:
            # a loose pivot threshold keeps COLAMD fill low; refinement in solve() restores accuracy
            self.lu = spla.splu(self.matrix, permc_spec="COLAMD", diag_pivot_thresh=1e-3)
        except RuntimeError as exc:
            raise SolverError(f"saddle-point factorization failed: {exc}") from exc

    def solve(self, f_u: np.ndarray, g_p: np.ndarray | None = None, u_fixed: np.ndarray | None = None):
        """Solve for (u, p); ``f_u`` is a full-length velocity load."""
        s = self.space
        uc = s.fixed_values[s.fixed] if u_fixed is None else u_fixed
        g = np.zeros(s.n_p) if g_p is None else g_p
        rhs = np.concatenate([f_u[self.free] - self.K_fc @ uc, g - self.B_c @ uc, np.zeros(self.n_extra)])
        x = self.lu.solve(rhs)
        bnorm = np.linalg.norm(rhs)
        res = rhs - self.matrix @ x
        rnorm = np.linalg.norm(res)
        # refine until the residual stagnates: the raw LU solution can be
        # much less accurate than its residual suggests
        for _ in range(3):
            if rnorm == 0.0:
                break
            x_new = x + self.lu.solve(res)
            res_new = rhs - self.matrix @ x_new
            r_new = np.linalg.norm(res_new)
            if r_new > 0.5 * rnorm:
                if r_new <= rnorm:
                    x, res, rnorm = x_new, res_new, r_new
                break
            x, res, rnorm = x_new, res_new, r_new
        if bnorm > 0 and rnorm > self.rtol * bnorm:
            raise SolverError(f"saddle solve residual {rnorm / bnorm:.3e} exceeds {self.rtol:g}", [rnorm / bnorm])
        u = np.empty(s.n_u)
        u[s.fixed] = uc
        nf = self.free.size
        u[self.free] = x[:nf]
        p = x[nf : nf + s.n_p]
        return MixedField(s, u, p)


def solve_saddle(system: AssembledSystem, rhs: np.ndarray | None = None) -> MixedField:
    """Solve ``(A + N) u + B^T p = f``, ``B u = 0`` with constraints eliminated."""
    K = system.A if system.N is None else system.A + system.N
    f = system.f if rhs is None else rhs
    return SaddleSolver(system.space, K, system.B).solve(f)


# --------------------------------------------------------------------------- diagnostics


@dataclass(eq=False)
class NormOperators:
    """Cached discrete mass/stiffness for H1 and divergence diagnostics."""

    space: MixedSpace
    A: sp.csr_matrix = field(init=False)
    M: sp.csr_matrix = field(init=False)
    B: sp.csr_matrix = field(init=False)
    Mp_diag: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A = _vector_block(scalar_stiffness(self.space))
        self.M = _vector_block(scalar_mass(self.space))
        self.B = divergence_operator(self.space)
        self.Mp_diag = pressure_mass(self.space).diagonal()

    def l2(self, u) -> float:
        return float(np.sqrt(max(u @ (self.M @ u), 0.0)))

    def h1_semi(self, u) -> float:
        return float(np.sqrt(max(u @ (self.A @ u), 0.0)))

    def h1(self, u) -> float:
        return float(np.sqrt(max(u @ (self.A @ u) + u @ (self.M @ u), 0.0)))

    def divergence_metric(self, u) -> float:
        """``max_k |int q_k div u| / (||q_k|| ||u||_H1)`` over pressure basis functions."""
        n = self.h1(u)
        if n == 0.0:
            return 0.0
        return float(np.max(np.abs(self.B @ u) / np.sqrt(self.Mp_diag)) / n)
