"""Implicit Euler integration of the time-dependent channel problem and decay diagnostics."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .discretization import MixedField, MixedSpace, SaddleSolver, SolverError, assemble, boundary_pressure_load, convection_operator, interpolate
from .fields import effective, poiseuille
from .steady import FlowCase, MeshOptions, Mode, SteadySolution, SolverOptions, solve_steady

logger = logging.getLogger(__name__)


class InitialKind(str, Enum):
    STEADY_EXACT = "steady_exact"
    POISEUILLE = "poiseuille"
    POISEUILLE_PLUS_VORTEX = "poiseuille_plus_vortex"


@dataclass(frozen=True)
class UnsteadyConfig:
    case: FlowCase
    initial: InitialKind = InitialKind.POISEUILLE_PLUS_VORTEX
    dt: float = 0.01
    T_end: float = 30.0
    delta: float = 0.5
    G_N: float = 2.0
    amplitude: float = 0.05
    center: tuple[float, float] | None = None
    radius: float = 0.2
    seed: int = 0
    inner_tol: float = 1e-10
    max_inner: int = 30

    def __post_init__(self):
        object.__setattr__(self, "initial", InitialKind(self.initial))
        if self.dt <= 0.0 or self.T_end <= 0.0:
            raise ValueError("dt and T_end must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")

    def vortex_center(self) -> tuple[float, float]:
        """Configured center, or one drawn from ``seed`` with the support inside Omega0."""
        if self.center is not None:
            return tuple(self.center)
        rng = np.random.default_rng(self.seed)
        lo, hi = self.radius + 0.05, 1.0 - self.radius - 0.05
        if lo >= hi:
            raise ValueError("vortex radius too large for the unit channel")
        return tuple(float(v) for v in rng.uniform(lo, hi, size=2))


def vortex_velocity(center, radius: float, amplitude: float):
    """``a * curl psi`` with ``psi = (1 - r^2/R^2)^4`` inside the disk, zero outside."""
    c = np.asarray(center, dtype=float)

    def vel(x):
        d = x - c
        s = 1.0 - np.sum(d * d, axis=1) / radius**2
        inside = s > 0.0
        dpsi = np.where(inside, 4.0 * np.clip(s, 0.0, None) ** 3, 0.0)[:, None] * (-2.0 * d / radius**2)
        return amplitude * np.column_stack([dpsi[:, 1], -dpsi[:, 0]])

    return vel


def leray_project(space: MixedSpace, u: np.ndarray, M: sp.spmatrix, B: sp.spmatrix) -> np.ndarray:
    """Discrete L2 projection onto weakly divergence-free fields with the space's constraints."""
    return SaddleSolver(space, M, B).solve(M @ u).u


def make_initial(config: UnsteadyConfig, space: MixedSpace, steady: SteadySolution | None = None) -> MixedField:
    kind = config.initial
    if kind is InitialKind.STEADY_EXACT:
        if steady is None:
            raise ValueError("steady_exact initial data needs the steady solution")
        return steady.field.copy()
    U0 = poiseuille(config.case.p0, config.case.p1)
    base = interpolate(space, U0.velocity, U0.pressure)
    if kind is InitialKind.POISEUILLE:
        return base
    center = np.asarray(config.vortex_center())
    R = config.radius
    if center[1] - R <= 0.0 or center[1] + R >= 1.0 or center[0] - R <= 0.0 or center[0] + R >= 1.0:
        raise ValueError(f"vortex support (center {center.tolist()}, radius {R}) must lie strictly inside Omega0")
    vort = interpolate(space, vortex_velocity(center, R, config.amplitude))
    system = assemble(space, need_mass=True)
    proj = leray_project(space, vort.u, system.M, system.B)
    return MixedField(space, base.u + proj, base.p.copy())


class Stepper:
    """Implicit Euler steps ``(M/dt + A) u + N(u) u + B^T p = f + M u_old / dt``.

    Convection is lagged inside a fixed-point loop so one factorization of
    ``M/dt + A`` serves every step and every inner iteration.
    """

    def __init__(self, space: MixedSpace, case: FlowCase, dt: float, tol: float = 1e-10, max_inner: int = 30):
        self.space = space
        self.case = case
        self.tol = tol
        self.max_inner = max_inner
        self.system = assemble(space, need_mass=True)
        self.f = boundary_pressure_load(space, case.p0, case.p1)
        self._set_dt(dt)

    def _set_dt(self, dt: float) -> None:
        self.dt = dt
        s = self.system
        self.solver = SaddleSolver(self.space, s.M / dt + s.A, s.B)

    def _attempt(self, state: MixedField) -> MixedField:
        s = self.system
        rhs0 = self.f + s.M @ state.u / self.dt
        if self.case.mode is Mode.STOKES:
            return self.solver.solve(rhs0)
        cur = state
        scale = math.sqrt(max(state.u @ (s.M @ state.u), 1e-300))
        for _ in range(self.max_inner):
            conv = convection_operator(self.space, cur.u) @ cur.u
            new = self.solver.solve(rhs0 - conv)
            d = new.u - cur.u
            change = math.sqrt(max(d @ (s.M @ d), 0.0))
            cur = new
            if change <= self.tol * max(scale, math.sqrt(max(new.u @ (s.M @ new.u), 0.0))):
                return cur
        raise SolverError(f"inner iteration did not converge in {self.max_inner} steps")

    def step(self, state: MixedField) -> MixedField:
        """One step of size ``dt``; on inner failure two half steps are tried once."""
        try:
            return self._attempt(state)
        except SolverError:
            dt = self.dt
            logger.warning("inner iteration failed at dt=%g; retrying with dt/2", dt)
            self._set_dt(0.5 * dt)
            try:
                return self._attempt(self._attempt(state))
            finally:
                self._set_dt(dt)


@dataclass
class DecayTrace:
    t: list[float] = field(default_factory=list)
    E: list[float] = field(default_factory=list)
    D: list[float] = field(default_factory=list)
    smallness: list[bool] = field(default_factory=list)
    E_S0: list[float] = field(default_factory=list)
    E_eff_Omega0: list[float] = field(default_factory=list)
    lambda_t: float = float("nan")
    r2: float = float("nan")
    window: tuple[float, float] = (float("nan"), float("nan"))

    def monotone(self, start: int = 1, rtol: float = 1e-12, floor_ratio: float = 1e-20) -> bool:
        """``E`` nonincreasing from sample ``start`` on, up to round-off at ``floor_ratio * E(0)``."""
        E = np.asarray(self.E[start:])
        atol = floor_ratio * self.E[0] if self.E else 0.0
        return bool(np.all(E[1:] <= E[:-1] * (1.0 + rtol) + atol + 1e-300))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,E,D,smallness_flag,E_S0,E_eff_Omega0\n")
            for row in zip(self.t, self.E, self.D, self.smallness, self.E_S0, self.E_eff_Omega0):
                t, E, D, flag, a, b = row
                fh.write(f"{t:.17g},{E:.17g},{D:.17g},{int(flag)},{a:.17g},{b:.17g}\n")


def fit_decay(t, E, floor_ratio: float = 1e-20) -> tuple[float, float, tuple[float, float]]:
    """Rate ``lambda`` of ``E ~ exp(-lambda t)`` after ``E`` first halves, above ``floor_ratio * E(0)``."""
    t = np.asarray(t)
    E = np.asarray(E)
    if E[0] <= 0.0:
        return math.inf, 1.0, (0.0, 0.0)
    start = np.flatnonzero(E <= 0.5 * E[0])
    if start.size == 0:
        return float("nan"), float("nan"), (float("nan"), float("nan"))
    i0 = start[0]
    keep = np.arange(i0, len(E))
    keep = keep[E[keep] > max(floor_ratio * E[0], 1e-300)]
    if keep.size < 3:
        return float("nan"), float("nan"), (float("nan"), float("nan"))
    x, y = t[keep], np.log(E[keep])
    slope, icpt = np.polyfit(x, y, 1)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - (slope * x + icpt)) ** 2) / ss if ss > 0 else 1.0
    return float(-slope), float(r2), (float(x[0]), float(x[-1]))


def _omega0_mass(space: MixedSpace) -> sp.csr_matrix:
    from .discretization import _scatter, _vector_block

    qd = space.quad
    mesh = space.mesh
    w = qd.wdet * (mesh.cell_row[qd.cells] >= mesh.n_rough)[:, None]
    Me = np.einsum("cq,qa,qb->cab", w, qd.N, qd.N, optimize=True)
    return _vector_block(_scatter(space.cell_dofs, space.cell_dofs, Me, (space.n_vn, space.n_vn)))


def run_decay(
    config: UnsteadyConfig,
    steady: SteadySolution | None = None,
    mesh_opts: MeshOptions | None = None,
    alpha1: float | None = None,
    record_every: int = 1,
) -> tuple[DecayTrace, MixedField]:
    """Integrate to ``T_end`` and record energy, dissipation and smallness diagnostics."""
    case = config.case
    steady = steady or solve_steady(case, mesh_opts, SolverOptions())
    space = steady.space
    stepper = Stepper(space, case, config.dt, config.inner_tol, config.max_inner)
    M, A = stepper.system.M, stepper.system.A
    M0 = _omega0_mass(space) if alpha1 is not None else None
    us = steady.field.u
    U0n = poiseuille(case.p0, case.p1).velocity(space.node_coords).T.ravel()
    Ueff = None
    if alpha1 is not None:
        Ueff = effective(case.p0, case.p1, case.eps, alpha1).velocity(space.node_coords).T.ravel()
    threshold = (1.0 - 0.5 * config.delta) / config.G_N**2

    trace = DecayTrace()

    def record(t, state):
        e = state.u - us
        E = float(e @ (M @ e))
        trace.t.append(t)
        trace.E.append(E)
        trace.D.append(float(e @ (A @ e)))
        trace.smallness.append(math.sqrt(max(E, 0.0)) <= threshold)
        d0 = state.u - U0n
        trace.E_S0.append(float(d0 @ (M @ d0)))
        if Ueff is not None:
            de = state.u - Ueff
            trace.E_eff_Omega0.append(float(de @ (M0 @ de)))
        else:
            trace.E_eff_Omega0.append(float("nan"))

    state = make_initial(config, space, steady)
    record(0.0, state)
    if math.sqrt(trace.E[0]) > (1.0 - config.delta) / config.G_N**2:
        warnings.warn("initial perturbation exceeds the small-data margin", RuntimeWarning, stacklevel=2)
    n_steps = int(round(config.T_end / config.dt))
    for n in range(1, n_steps + 1):
        state = stepper.step(state)
        if n % record_every == 0 or n == n_steps:
            record(n * config.dt, state)
    trace.lambda_t, trace.r2, trace.window = fit_decay(trace.t, trace.E)
    return trace, state
