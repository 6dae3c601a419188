"""Region norms, scaled Poincare/trace ratios, rate fits and epsilon sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .cell import CellCorrector, CellResolution, solve_cell
from .discretization import MixedField, SolverError, horizontal_edge_rule
from .fields import CompositeFlags, compose, effective, side_layers
from .geometry import BoundaryProfile, ChannelMesh, Grading, MeshError, _check_inverse_integer
from .steady import FlowCase, MeshOptions, Mode, SolverOptions, perturbation_field, solve_steady

logger = logging.getLogger(__name__)


class Region(str, Enum):
    OMEGA0 = "Omega0"
    OMEGA_EPS = "OmegaEps"
    ROUGH_LAYER = "RoughLayer"
    OMEGA_EPS_MINUS_SIDE_STRIPS = "OmegaEpsMinusSideStrips"
    GAMMA0_TRACE = "Gamma0_trace"


class NormKind(str, Enum):
    L1 = "L1"
    L2 = "L2"
    L4 = "L4"
    H1SEMI = "H1semi"


_EXPONENT = {NormKind.L1: 1.0, NormKind.L2: 2.0, NormKind.L4: 4.0, NormKind.H1SEMI: 2.0}


@dataclass(frozen=True)
class NormRequest:
    """A field (anything with ``at_quadrature``/``evaluate`` or a callable x -> (u, grad, ...))
    together with a region and a norm."""

    field: object
    region: Region
    norm: NormKind
    ell: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "region", Region(self.region))
        object.__setattr__(self, "norm", NormKind(self.norm))
        if self.region is Region.GAMMA0_TRACE and self.norm is NormKind.H1SEMI:
            raise ValueError("trace norms support L1, L2 and L4 only")


def _sample_quadrature(fld, qd):
    if hasattr(fld, "at_quadrature"):
        out = fld.at_quadrature(qd)
        return out[0], out[1]
    x = qd.x.reshape(-1, 2)
    out = fld(x)
    u, g = out[0], out[1]
    return u.reshape(*qd.x.shape[:2], 2), g.reshape(*qd.x.shape[:2], 2, 2)


def _sample_points(fld, x):
    if isinstance(fld, MixedField):
        return fld.evaluate(x, gradient=False)[0]
    if hasattr(fld, "evaluate"):
        return fld.evaluate(x)[0]
    return fld(x)[0]


def region_weights(mesh: ChannelMesh, qd, region: Region, ell: float = 0.25) -> np.ndarray:
    """Quadrature weights ``w * det J`` restricted to an area region (zero elsewhere)."""
    rough = (mesh.cell_row[qd.cells] < mesh.n_rough)[:, None]
    rough = np.broadcast_to(rough, qd.wdet.shape)
    if region is Region.OMEGA_EPS:
        keep = np.ones_like(rough)
    elif region is Region.OMEGA0:
        keep = ~rough
    elif region is Region.ROUGH_LAYER:
        keep = rough
    elif region is Region.OMEGA_EPS_MINUS_SIDE_STRIPS:
        w = mesh.epsilon * ell
        x1 = qd.x[..., 0]
        keep = ~(rough & ((x1 < w) | (x1 > 1.0 - w)))
    else:
        raise ValueError(f"{region.value} is not an area region")
    return np.where(keep, qd.wdet, 0.0)


def gamma0_rule(mesh: ChannelMesh):
    """Points and weights of the 3-point Gauss rule along the interface ``x2 = 0``."""
    cells, xi, wds = horizontal_edge_rule(mesh, mesh.n_rough)
    x, _ = mesh.map(cells, xi, shared=True)
    return x.reshape(-1, 2), wds.ravel()


def norm(request: NormRequest, mesh: ChannelMesh, qd=None) -> float:
    """Quadrature value of the requested norm."""
    p = _EXPONENT[request.norm]
    if request.region is Region.GAMMA0_TRACE:
        x, w = gamma0_rule(mesh)
        u = np.atleast_2d(_sample_points(request.field, x))
        return float(np.sum(w * np.linalg.norm(u, axis=1) ** p) ** (1.0 / p))
    if qd is None:
        from .discretization import QuadratureData

        qd = QuadratureData.build(mesh)
    w = region_weights(mesh, qd, request.region, request.ell)
    u, g = _sample_quadrature(request.field, qd)
    if request.norm is NormKind.H1SEMI:
        mag = np.sqrt(np.einsum("cqij,cqij->cq", g, g))
    else:
        mag = np.linalg.norm(u, axis=-1)
    return float(np.sum(w * mag**p) ** (1.0 / p))


def rough_layer_ratios(fld, mesh: ChannelMesh, qd=None, tol: float = 1e-8) -> tuple[float, float, float]:
    """Scaled Poincare and trace ratios on the rough layer.

    ``r1 = |phi|_{L2(R)} / (eps |grad phi|_{L2(R)})``,
    ``r2 = |phi|_{L2(Gamma0)} / (eps^1/2 |grad phi|_{L2(R)})``,
    ``r3 = int_Gamma0 |phi| / (eps^1/2 |d2 phi|_{L2(R)})``; 0/0 gives 0.
    """
    from .discretization import QuadratureData

    eps = mesh.epsilon
    if mesh.n_rough == 0:
        return 0.0, 0.0, 0.0
    bottom = mesh.tags["GammaEps"]
    ub = np.atleast_2d(_sample_points(fld, mesh.nodes[bottom]))
    if np.abs(ub).max() > tol:
        raise ValueError(f"field does not vanish on the rough boundary (max {np.abs(ub).max():.3e})")
    qd = qd or QuadratureData.build(mesh)
    w = region_weights(mesh, qd, Region.ROUGH_LAYER)
    u, g = _sample_quadrature(fld, qd)
    l2 = math.sqrt(np.sum(w * np.sum(u * u, axis=-1)))
    h1 = math.sqrt(np.sum(w * np.einsum("cqij,cqij->cq", g, g)))
    d2 = math.sqrt(np.sum(w * np.sum(g[..., :, 1] ** 2, axis=-1)))
    x, wt = gamma0_rule(mesh)
    ut = np.linalg.norm(np.atleast_2d(_sample_points(fld, x)), axis=1)
    tr2 = math.sqrt(np.sum(wt * ut**2))
    tr1 = float(np.sum(wt * ut))

    def ratio(a, b):
        return 0.0 if b == 0.0 and a == 0.0 else (math.inf if b == 0.0 else a / b)

    return ratio(l2, eps * h1), ratio(tr2, math.sqrt(eps) * h1), ratio(tr1, math.sqrt(eps) * d2)


# --------------------------------------------------------------------------- rates


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    n: int


def fit_rate(points) -> RateFit:
    """Least squares of ``log error`` against ``log eps``."""
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 3:
        raise ValueError("need >= 3 points for a rate fit")
    if any(v <= 0.0 or e <= 0.0 for e, v in pts):
        raise ValueError("rate fits need positive eps and error values")
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    slope, icpt = np.polyfit(x, y, 1)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - (slope * x + icpt)) ** 2) / ss if ss > 0 else 1.0
    return RateFit(float(slope), float(icpt), float(r2), len(pts))


# --------------------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepConfig:
    profile: BoundaryProfile
    eps_list: tuple[float, ...] = (1 / 8, 1 / 16, 1 / 32)
    p0: float = 0.0
    p1: float = -1.0
    mode: Mode = Mode.STOKES
    mesh: MeshOptions = field(default_factory=MeshOptions)
    cell_H: float = 10.0
    ell: float = 0.25
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        for e in self.eps_list:
            _check_inverse_integer(e)
        if len(self.eps_list) < 3:
            raise ValueError("need >= 3 epsilon values for a rate fit")

    @property
    def cell_resolution(self) -> CellResolution:
        g = self.mesh.grading
        return CellResolution(
            nx=self.mesh.cells_per_period,
            grading=Grading(n_rough=g.n_rough, n_wall=g.n_wall, wall_height=g.wall_height, growth=1.25, cap=0.5),
        )


# column name -> (description, predicted slope threshold or None)
COLUMNS = {
    "eps": ("roughness period", None),
    "alpha1": ("tail constant used", None),
    "e_L2_eff": ("|U_eps - U_eff|_L2(Omega0)", 1.4),
    "e_L1_eff": ("|U_eps - U_eff|_L1(Omega0)", 1.8),
    "e_L2_W": ("|W|_L2(Omega0), full ansatz", 1.8),
    "e_H1_W": ("|grad W|_L2(OmegaEps minus side strips)", 1.4),
    "e_H1_W_strips": ("|grad W|_L2 over the excluded side strips", None),
    "e_H1_W_Omega0": ("|grad W|_L2(Omega0)", None),
    "e_L2_pert_sq": ("|U_eps - U_0|^2_L2(OmegaEps)", 1.8),
    "e_H1_pert_sq": ("|grad(U_eps - U_0)|^2_L2(OmegaEps)", 0.85),
    "S_L1": ("|S_in|_L1", None),
    "S_L2": ("|S_in|_L2", None),
    "gradS_L1": ("|grad S_in|_L1", None),
    "gradS_L2": ("|grad S_in|_L2", None),
    "poincare_ratio": ("rough-layer Poincare ratio", None),
    "trace_l2_ratio": ("interface L2 trace ratio", None),
    "trace_l1_ratio": ("interface L1 trace ratio", None),
    "sup_W_Gamma1": ("sup |W| on the lid", None),
    "flux": ("outflow flux", None),
    "picard_iters": ("nonlinear iterations", None),
    "divergence": ("discrete divergence metric", None),
}

DEGENERATE_LEVEL = 1e-11


@dataclass
class SweepRow:
    eps: float
    values: dict[str, float] = field(default_factory=dict)
    error: str | None = None


def compute_row(config: SweepConfig, corr: CellCorrector, eps: float) -> SweepRow:
    """Solve one channel problem and evaluate every reported norm."""
    case = FlowCase(config.p0, config.p1, eps, config.profile, config.mode)
    try:
        sol = solve_steady(case, config.mesh, config.solver)
    except (SolverError, MeshError) as exc:
        return SweepRow(eps, error=f"{type(exc).__name__}: {exc}")
    mesh = sol.mesh
    qd = sol.space.quad
    ell = config.ell
    v: dict[str, float] = {"eps": eps, "alpha1": corr.alpha1}

    def n(fld, region, kind):
        return norm(NormRequest(fld, region, kind, ell), mesh, qd)

    ueff = effective(config.p0, config.p1, eps, corr.alpha1)
    diff_eff = _Difference(sol.field, ueff)
    v["e_L2_eff"] = n(diff_eff, Region.OMEGA0, NormKind.L2)
    v["e_L1_eff"] = n(diff_eff, Region.OMEGA0, NormKind.L1)
    W = compose(sol, corr, CompositeFlags.full(), ell)
    v["e_L2_W"] = n(W, Region.OMEGA0, NormKind.L2)
    v["e_H1_W"] = n(W, Region.OMEGA_EPS_MINUS_SIDE_STRIPS, NormKind.H1SEMI)
    full = n(W, Region.OMEGA_EPS, NormKind.H1SEMI)
    v["e_H1_W_strips"] = math.sqrt(max(full**2 - v["e_H1_W"] ** 2, 0.0))
    v["e_H1_W_Omega0"] = n(W, Region.OMEGA0, NormKind.H1SEMI)
    pert = perturbation_field(sol)
    v["e_L2_pert_sq"] = n(pert, Region.OMEGA_EPS, NormKind.L2) ** 2
    v["e_H1_pert_sq"] = n(pert, Region.OMEGA_EPS, NormKind.H1SEMI) ** 2
    s_in, _ = side_layers(corr, eps, ell)
    v["S_L1"], v["gradS_L1"] = s_in.norms(1)
    v["S_L2"], v["gradS_L2"] = s_in.norms(2)
    v["poincare_ratio"], v["trace_l2_ratio"], v["trace_l1_ratio"] = rough_layer_ratios(pert, mesh, qd)
    top = mesh.nodes[mesh.tags["Gamma1"]]
    top = top[(top[:, 0] > 0.0) & (top[:, 0] < 1.0)]
    v["sup_W_Gamma1"] = float(np.abs(W.evaluate(top)[0]).max())
    v["flux"] = sol.flux
    v["picard_iters"] = float(sol.iterations)
    v["divergence"] = sol.divergence
    if v["e_L1_eff"] > v["e_L2_eff"] * (1 + 1e-12):
        logger.warning("Hoelder check failed: L1 %.3e > L2 %.3e on Omega0", v["e_L1_eff"], v["e_L2_eff"])
    logger.info("eps=%g done", eps)
    return SweepRow(eps, v)


@dataclass(frozen=True)
class _Difference:
    """``U_h - U_analytic`` sampled at quadrature points or arbitrary points."""

    discrete: MixedField
    analytic: object

    def at_quadrature(self, qd):
        u, g, _ = self.discrete.at_quadrature(qd)
        x = qd.x.reshape(-1, 2)
        ua, ga, _ = self.analytic(x)
        return u - ua.reshape(u.shape), g - ga.reshape(g.shape)

    def evaluate(self, x):
        u, g, _ = self.discrete.evaluate(x)
        ua, ga, _ = self.analytic(x)
        return u - ua, g - ga


def _row_job(args):
    config, corr, eps = args
    return compute_row(config, corr, eps)


@dataclass
class SweepReport:
    config: SweepConfig
    rows: list[SweepRow]
    corrector_alpha1: float

    @property
    def good_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.error is None]

    def series(self, name: str) -> list[tuple[float, float]]:
        return [(r.eps, r.values[name]) for r in self.good_rows]

    def fit(self, name: str) -> RateFit | str:
        """Fitted slope, or ``"degenerate"`` when the series is at round-off level."""
        pts = self.series(name)
        if len(pts) < 3:
            raise ValueError(f"need >= 3 surviving rows to fit {name}")
        if max(abs(v) for _, v in pts) <= DEGENERATE_LEVEL or any(v <= 0.0 for _, v in pts):
            return "degenerate"
        return fit_rate(pts)

    def robustness(self, name: str) -> float | None:
        """Change of the fitted slope when the largest eps is dropped (>= 4 rows)."""
        pts = sorted(self.series(name), reverse=True)
        full = self.fit(name)
        if len(pts) < 4 or isinstance(full, str):
            return None
        return abs(full.slope - fit_rate(pts[1:]).slope)

    @property
    def fits(self) -> dict[str, RateFit | str]:
        return {k: self.fit(k) for k, (_, thr) in COLUMNS.items() if thr is not None or k.startswith(("S_", "gradS_"))}

    def write_csv(self, path) -> None:
        names = list(COLUMNS)
        with open(path, "w") as fh:
            fh.write("# columns: " + "; ".join(f"{k} = {COLUMNS[k][0]}" for k in names) + "\n")
            fh.write(",".join(names + ["status"]) + "\n")
            for r in self.rows:
                if r.error:
                    fh.write(",".join([f"{r.eps:.17g}"] + ["" for _ in names[1:]] + [f"missing ({r.error})"]) + "\n")
                else:
                    fh.write(",".join(f"{r.values[k]:.17g}" for k in names) + ",ok\n")

    def summary(self) -> str:
        lines = [
            f"profile: {self.config.profile.descriptor()}",
            f"alpha1: {self.corrector_alpha1:.17g}",
            f"rows: {len(self.good_rows)}/{len(self.rows)}",
        ]
        for r in self.rows:
            if r.error:
                lines.append(f"missing eps={r.eps:g}: {r.error}")
        for name, f in self.fits.items():
            thr = COLUMNS[name][1]
            if isinstance(f, str):
                lines.append(f"slope {name}: {f}")
                continue
            verdict = "" if thr is None else f" (threshold {thr}: {'pass' if f.slope >= thr else 'FAIL'})"
            rob = self.robustness(name)
            rtxt = "" if rob is None else f" drop-largest change {rob:.3f}"
            lines.append(f"slope {name}: {f.slope:.4f} R2 {f.r2:.5f}{verdict}{rtxt}")
        return "\n".join(lines) + "\n"


def run_sweep(config: SweepConfig, workers: int = 1, corr: CellCorrector | None = None) -> SweepReport:
    """Solve the steady problem for every eps (one shared corrector) and fit all rates."""
    corr = corr or solve_cell(config.profile, config.cell_H, config.cell_resolution)
    jobs = [(config, corr, e) for e in config.eps_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row_job, jobs))
    else:
        rows = [_row_job(j) for j in jobs]
    report = SweepReport(config, rows, corr.alpha1)
    if len(report.good_rows) < 3:
        logger.warning("only %d sweep rows survived; slopes unavailable", len(report.good_rows))
    return report
