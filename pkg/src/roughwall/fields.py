"""Closed-form and composite fields of the wall-law analysis.

All evaluators take points ``x`` of shape (n, 2) and return velocities (n, 2),
gradients (n, 2, 2) with ``[..., i, j] = d_j u_i`` and pressures (n,).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from enum import Enum
from typing import Callable

import numpy as np

from .cell import CellCorrector
from .discretization import QuadratureData, gauss_rule_1d


class Provenance(str, Enum):
    POISEUILLE = "poiseuille"
    EFFECTIVE = "effective"
    CHI_C = "chi_c"
    SIDE_IN = "side_in"
    SIDE_OUT = "side_out"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class AnalyticField:
    """Pointwise evaluator of a velocity/pressure pair."""

    provenance: Provenance
    _velocity: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    _pressure: Callable[[np.ndarray], np.ndarray]

    def velocity(self, x) -> np.ndarray:
        return self._velocity(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def gradient(self, x) -> np.ndarray:
        return self._velocity(np.atleast_2d(np.asarray(x, dtype=float)))[1]

    def pressure(self, x) -> np.ndarray:
        return self._pressure(np.atleast_2d(np.asarray(x, dtype=float)))

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u, g = self._velocity(x)
        return u, g, self._pressure(x)


def _affine_pressure(p0: float, p1: float):
    return lambda x: (p1 - p0) * x[:, 0] + p0


def _shear_profile(coef: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]], below_zero: bool):
    """Unidirectional field ``(f(x2), 0)``; ``below_zero`` zeroes it for ``x2 < 0``."""

    def vel(x):
        f, df = coef(x[:, 1])
        if below_zero:
            neg = x[:, 1] < 0.0
            f = np.where(neg, 0.0, f)
            df = np.where(neg, 0.0, df)
        u = np.zeros_like(x)
        u[:, 0] = f
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 1] = df
        return u, g

    return vel


def poiseuille(p0: float, p1: float) -> AnalyticField:
    """``U_1 = (p1 - p0)/2 * x2 (x2 - 1)``, extended by zero below ``x2 = 0``."""
    k = 0.5 * (p1 - p0)
    return AnalyticField(
        Provenance.POISEUILLE,
        _shear_profile(lambda z: (k * z * (z - 1.0), k * (2.0 * z - 1.0)), below_zero=True),
        _affine_pressure(p0, p1),
    )


def effective(p0: float, p1: float, eps: float, alpha1: float) -> AnalyticField:
    """Wall-law flow with slip length ``eps * alpha1`` at ``x2 = 0``."""
    s = 1.0 + eps * alpha1
    if s <= 0.0:
        raise ValueError("need 1 + eps*alpha1 > 0")
    k = 0.5 * (p1 - p0)
    return AnalyticField(
        Provenance.EFFECTIVE,
        _shear_profile(lambda z: (k * (z * z - (z + eps * alpha1) / s), k * (2.0 * z - 1.0 / s)), below_zero=False),
        _affine_pressure(p0, p1),
    )


def chi_c() -> AnalyticField:
    """``(1 - x2, 0)`` above the interface and ``(1, 0)`` below, zero pressure."""

    def coef(z):
        below = z < 0.0
        return np.where(below, 1.0, 1.0 - z), np.where(below, 0.0, -1.0)

    return AnalyticField(Provenance.CHI_C, _shear_profile(coef, below_zero=False), lambda x: np.zeros(len(x)))


def slip_identity_residual(p0: float, p1: float, eps: float, alpha1: float, x2) -> np.ndarray:
    """Residual of the closed-form relation between effective and Poiseuille flows on ``0 <= x2 <= 1``."""
    x2 = np.asarray(x2, dtype=float)
    pts = np.column_stack([np.zeros_like(x2), x2])
    m = -0.5 * (p1 - p0)
    lhs = effective(p0, p1, eps, alpha1).velocity(pts)[:, 0] - poiseuille(p0, p1).velocity(pts)[:, 0] - eps * alpha1 * (1.0 - x2) * m
    rhs = 0.5 * (p1 - p0) * eps**2 * alpha1**2 * (1.0 - x2) / (1.0 + eps * alpha1)
    return lhs - rhs


# --------------------------------------------------------------------------- side layers


@dataclass(frozen=True)
class SideLayer:
    """Cut-off seam correction ``S^{in,eps}`` (side 0) or ``S^{out,eps}`` (side 1).

    The seam derivative of ``V_1`` is replaced by ``-d2 V2`` (equal for a
    divergence-free corrector), which keeps the field exactly solenoidal.
    Values for ``x2 < 0`` are zero: the extension into the rough layer is not
    modeled and callers exclude those strips from norms.
    """

    corr: CellCorrector
    eps: float
    ell: float = 0.25
    side: int = 0

    def __post_init__(self):
        if not (0.0 < self.ell <= 0.5):
            raise ValueError("ell must lie in (0, 1/2]")
        if self.side not in (0, 1):
            raise ValueError("side is 0 (inflow) or 1 (outflow)")

    @property
    def provenance(self) -> Provenance:
        return Provenance.SIDE_IN if self.side == 0 else Provenance.SIDE_OUT

    @property
    def support(self) -> tuple[float, float]:
        w = self.eps * self.ell
        return (0.0, w) if self.side == 0 else (1.0 - w, 1.0)

    @property
    def top(self) -> float:
        """Height above which the field vanishes (corrector tail)."""
        return min(1.0, self.eps * self.corr.H)

    def _weight(self, x1):
        """Cut-off coordinate ``t`` in [0, 1] (1 at the side) and ``dt/dx1``."""
        w = self.eps * self.ell
        if self.side == 0:
            t = 1.0 - x1 / w
            dt = -1.0 / w
        else:
            t = 1.0 - (1.0 - x1) / w
            dt = 1.0 / w
        return np.clip(t, 0.0, 1.0), np.where((t > 0.0) & (t <= 1.0), dt, 0.0)

    def __call__(self, x):
        """Velocity (n, 2) and gradient (n, 2, 2)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        eps, ell = self.eps, self.ell
        u = np.zeros_like(x)
        g = np.zeros((len(x), 2, 2))
        t, dt = self._weight(x[:, 0])
        act = (t > 0.0) & (x[:, 1] >= 0.0) & (x[:, 1] < eps * self.corr.H)
        if not np.any(act):
            return u, g
        t, dt = t[act], dt[act]
        w, w1, w2 = self.corr.seam_trace(x[act, 1] / eps)
        sgn = 1.0 if self.side == 0 else -1.0
        # S1 = sgn * (eps*ell/3) t^3 w',  S2 = eps t^2 w
        u[act, 0] = sgn * eps * ell / 3.0 * t**3 * w1
        u[act, 1] = eps * t**2 * w
        g[act, 0, 0] = sgn * eps * ell * t**2 * dt * w1
        g[act, 0, 1] = sgn * ell / 3.0 * t**3 * w2
        g[act, 1, 0] = 2.0 * eps * t * dt * w
        g[act, 1, 1] = t**2 * w1
        return u, g

    def velocity(self, x):
        return self(x)[0]

    def gradient(self, x):
        return self(x)[1]

    def _rule(self, n_x1: int = 8, order: int = 6):
        """Tensor Gauss rule on the support, split at the strip's row lines."""
        a, b = self.support
        t, w = gauss_rule_1d(order)
        xb = np.linspace(a, b, n_x1 + 1)
        X1 = (xb[:-1, None] + np.diff(xb)[:, None] * t[None, :]).ravel()
        W1 = (np.diff(xb)[:, None] * w[None, :]).ravel()
        lines = self.corr.mesh.row_lines(np.zeros(1))[0][self.corr.mesh.n_rough :] * self.eps
        zb = np.unique(np.clip(np.append(lines, self.top), 0.0, self.top))
        X2 = (zb[:-1, None] + np.diff(zb)[:, None] * t[None, :]).ravel()
        W2 = (np.diff(zb)[:, None] * w[None, :]).ravel()
        P1, P2 = np.meshgrid(X1, X2, indexing="ij")
        return np.column_stack([P1.ravel(), P2.ravel()]), np.outer(W1, W2).ravel()

    def norms(self, q: float) -> tuple[float, float]:
        """``(||S||_{L^q}, ||grad S||_{L^q})`` over the channel."""
        pts, wts = self._rule()
        u, g = self(pts)
        su = np.linalg.norm(u, axis=1)
        sg = np.sqrt(np.einsum("nij,nij->n", g, g))
        return float(np.sum(wts * su**q) ** (1.0 / q)), float(np.sum(wts * sg**q) ** (1.0 / q))


def side_layers(corr: CellCorrector, eps: float, ell: float = 0.25) -> tuple[SideLayer, SideLayer]:
    return SideLayer(corr, eps, ell, 0), SideLayer(corr, eps, ell, 1)


def side_layer_norms(layer: SideLayer, q: float) -> tuple[float, float]:
    if q not in (1, 2, 4):
        raise ValueError("q must be 1, 2 or 4")
    return layer.norms(q)


# --------------------------------------------------------------------------- composite


@dataclass(frozen=True)
class CompositeFlags:
    """Correction terms subtracted from (or added to) ``U_eps - U_0``."""

    boundary_layer: bool = True
    interface: bool = True
    chi_c: bool = True
    side_in: bool = False
    side_out: bool = False

    @classmethod
    def none(cls) -> "CompositeFlags":
        return cls(False, False, False, False, False)

    @classmethod
    def tilde(cls) -> "CompositeFlags":
        return cls(True, True, True, False, False)

    @classmethod
    def full(cls) -> "CompositeFlags":
        return cls(True, True, True, True, True)

    def active(self) -> tuple[str, ...]:
        return tuple(f.name for f in dc_fields(self) if getattr(self, f.name))


@dataclass(eq=False)
class CompositeErrorField:
    """``U_eps - U_0`` minus the first-order wall-law correctors, term by term."""

    sol: object
    corr: CellCorrector
    flags: CompositeFlags = field(default_factory=CompositeFlags.full)
    ell: float = 0.25

    def __post_init__(self):
        if self.sol.case.profile.digest() != self.corr.profile.digest():
            raise ValueError("steady solution and cell corrector use different profiles")
        case = self.sol.case
        self.eps = case.eps
        self.m = case.wall_shear
        self.U0 = poiseuille(case.p0, case.p1)
        self.chi = chi_c()
        self.sides = side_layers(self.corr, self.eps, self.ell)

    def _corrections(self, x):
        """Sum of active correction terms (velocity, gradient) at points ``x``."""
        eps, m, fl = self.eps, self.m, self.flags
        u = np.zeros_like(x)
        g = np.zeros((len(x), 2, 2))
        below = x[:, 1] <= 0.0
        if fl.boundary_layer:
            V, gV = self.corr.evaluate_scaled(x, eps, gradient=True)
            u -= eps * (V - self.corr.alpha) * m
            g -= gV * m
        if fl.interface:
            u[:, 0] -= np.where(below, x[:, 1], 0.0) * m
            g[:, 0, 1] -= np.where(below, 1.0, 0.0) * m
        if fl.chi_c:
            cu, cg = self.chi._velocity(x)
            u -= eps * self.corr.alpha1 * cu * m
            g -= eps * self.corr.alpha1 * cg * m
        for on, layer in ((fl.side_in, self.sides[0]), (fl.side_out, self.sides[1])):
            if on:
                su, sg = layer(x)
                u += su * m
                g += sg * m
        return u, g

    def evaluate(self, x):
        """Velocity (n, 2) and gradient (n, 2, 2) at points of the channel."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ue, ge, _ = self.sol.field.evaluate(x)
        u0, g0 = self.U0._velocity(x)
        cu, cg = self._corrections(x)
        return ue - u0 + cu, ge - g0 + cg

    def at_quadrature(self, qd: QuadratureData):
        """Velocity (c, q, 2) and gradient (c, q, 2, 2) on channel quadrature points."""
        ue, ge, _ = self.sol.field.at_quadrature(qd)
        x = qd.x.reshape(-1, 2)
        u0, g0 = self.U0._velocity(x)
        cu, cg = self._corrections(x)
        shape = qd.x.shape[:2]
        return ue + (cu - u0).reshape(*shape, 2), ge + (cg - g0).reshape(*shape, 2, 2)


def compose(sol, corr: CellCorrector, flags: CompositeFlags | None = None, ell: float = 0.25) -> CompositeErrorField:
    return CompositeErrorField(sol, corr, flags or CompositeFlags.full(), ell)


def sample_grid(path, evaluator: Callable[[np.ndarray], tuple], n1: int, n2: int, x2_range=(0.0, 1.0)) -> None:
    """Write ``x1,x2,u1,u2,p`` on a uniform grid; ``evaluator`` returns (u, grad, p)."""
    X1, X2 = np.meshgrid(np.linspace(0.0, 1.0, n1), np.linspace(*x2_range, n2), indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    u, _, p = evaluator(pts)
    with open(path, "w") as fh:
        fh.write("x1,x2,u1,u2,p\n")
        for (a, b), (c, d), e in zip(pts, u, p):
            fh.write(f"{a:.17g},{b:.17g},{c:.17g},{d:.17g},{e:.17g}\n")
