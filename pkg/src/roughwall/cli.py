"""Command-line entry point: YAML run configuration, orchestration, CSV and SVG output."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .cell import CellResolution, alpha_stability, decay_fit, solve_cell, write_summary
from .discretization import SolverError
from .geometry import Grading, MeshError, ProfileError, ProfileKind, ProfileSpec, build_strip_mesh, make_profile
from .plots import loglog_plot, semilogy_plot
from .steady import FlowCase, MeshOptions, Mode, SolverOptions, solve_steady, write_field

logger = logging.getLogger("roughwall")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProfileSection(_Strict):
    kind: ProfileKind = Field(ProfileKind.COSINE, description="flat, shifted_flat, cosine, sum_of_cosines, custom_samples")
    amplitude: float = Field(0.25, description="depth for shifted_flat, peak-to-trough depth for cosine")
    cos_coeffs: list[float] = []
    sin_coeffs: list[float] = []
    samples: list[float] = []
    phase: float = 0.0
    mirror: bool = False
    pin_origin: bool = False
    collar: float = 0.1


class FlowSection(_Strict):
    p0: float = 0.0
    p1: float = -1.0
    mode: Mode = Mode.STOKES
    eps: float = Field(0.125, description="period for cell-free commands (steady, unsteady)")
    eps_list: list[float] = Field([1 / 8, 1 / 16, 1 / 32], description="periods for the sweep")
    large: bool = Field(False, description="append eps = 1/64 to the sweep")


class MeshSection(_Strict):
    cells_per_period: int = Field(32, ge=4)
    ny: int = Field(44, ge=4)
    n_rough: int = Field(4, ge=1)
    n_wall: int = Field(16, ge=1)
    wall_height: float = Field(2.0, gt=0)


class CellSection(_Strict):
    H: float = Field(10.0, gt=1.0)
    H_list: list[float] = Field([], description="optional increasing heights for the alpha_1 stability table")


class UnsteadySection(_Strict):
    initial: Literal["steady_exact", "poiseuille", "poiseuille_plus_vortex"] = "poiseuille_plus_vortex"
    dt: float = Field(0.01, gt=0)
    T_end: float = Field(30.0, gt=0)
    delta: float = Field(0.5, gt=0, lt=1)
    G_N: float = Field(2.0, gt=0)
    amplitude: float = 0.05
    center: list[float] | None = None
    radius: float = Field(0.2, gt=0)


class SolverSection(_Strict):
    tol: float = Field(1e-10, gt=0)
    max_iters: int = Field(50, ge=1)
    smallness: float = Field(1.0, gt=0)


class RunConfig(_Strict):
    profile: ProfileSection = ProfileSection()
    flow: FlowSection = FlowSection()
    mesh: MeshSection = MeshSection()
    cell: CellSection = CellSection()
    unsteady: UnsteadySection = UnsteadySection()
    solver: SolverSection = SolverSection()
    ell: float = Field(0.25, gt=0, lt=0.5)
    out: str = "out"
    workers: int = Field(1, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _center_shape(self):
        c = self.unsteady.center
        if c is not None and len(c) != 2:
            raise ValueError("unsteady.center needs two coordinates")
        return self

    # builders

    def build_profile(self):
        p = self.profile
        spec = ProfileSpec(p.kind, p.amplitude, tuple(p.cos_coeffs), tuple(p.sin_coeffs), tuple(p.samples),
                           p.phase, p.mirror, p.pin_origin, p.collar)
        return make_profile(spec)

    def mesh_options(self) -> MeshOptions:
        m = self.mesh
        return MeshOptions(m.cells_per_period, m.ny, Grading(m.n_rough, m.n_wall, m.wall_height))

    def cell_resolution(self) -> CellResolution:
        m = self.mesh
        return CellResolution(nx=m.cells_per_period, grading=Grading(m.n_rough, m.n_wall, m.wall_height, growth=1.25, cap=0.5))

    def solver_options(self) -> SolverOptions:
        s = self.solver
        return SolverOptions(tol=s.tol, max_iters=s.max_iters, smallness=s.smallness)

    def sweep_eps(self) -> list[float]:
        eps = list(self.flow.eps_list)
        if self.flow.large and 1 / 64 not in eps:
            eps.append(1 / 64)
        return eps


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------- config loading


def _node_line(root, loc) -> int | None:
    """1-based source line of the YAML node at key path ``loc``."""
    node, line = root, None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt, line = v, k.start_mark.line + 1
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _set_path(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"override {dotted}: {k} is not a section")
    cur[keys[-1]] = value


def load_config(path: str | None, overrides: list[str] = (), out: str | None = None, workers: int | None = None) -> RunConfig:
    """Parse YAML, apply ``key.path=value`` overrides, validate; raise ``ConfigError`` with key/line info."""
    text, root, data = "", None, {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            root = yaml.compose(text)
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: YAML syntax error: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        k, v = item.split("=", 1)
        _set_path(data, k.strip(), yaml.safe_load(v))
    if out is not None:
        data["out"] = out
    if workers is not None:
        data["workers"] = workers
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            key = ".".join(str(p) for p in err["loc"])
            where = _node_line(root, err["loc"]) if root is not None else None
            at = f"{path}:{where}: " if where else ""
            lines.append(f"{at}{key}: {err['msg']}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines)) from exc


# --------------------------------------------------------------------------- commands


def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _case(cfg: RunConfig, profile, eps=None) -> FlowCase:
    return FlowCase(cfg.flow.p0, cfg.flow.p1, cfg.flow.eps if eps is None else eps, profile, cfg.flow.mode)


def cmd_check(cfg: RunConfig) -> int:
    profile = cfg.build_profile()
    mopts = cfg.mesh_options()
    for eps in sorted({cfg.flow.eps, *cfg.sweep_eps()}, reverse=True):
        mesh = mopts.build(profile, eps)
        logger.info("channel eps=%g: %d x %d cells", eps, mesh.nx, mesh.ny)
    res = cfg.cell_resolution()
    strip = build_strip_mesh(profile, cfg.cell.H, res.nx, res.ny, res.grading)
    logger.info("cell strip H=%g: %d x %d cells", cfg.cell.H, strip.nx, strip.ny)
    if len(cfg.sweep_eps()) < 3:
        logger.warning("sweep would fail: need >=3 for rate fit")
    sys.stdout.write(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False))
    return EXIT_OK


def cmd_cell(cfg: RunConfig) -> int:
    profile = cfg.build_profile()
    out = _outdir(cfg)
    corr = solve_cell(profile, cfg.cell.H, cfg.cell_resolution())
    fit = decay_fit(corr)
    write_summary(out / "cell_summary.csv", corr, fit)
    tab = np.asarray(corr.decay_table)
    semilogy_plot(out / "cell_decay.svg", {"sup |grad V|": (tab[:, 0].tolist(), tab[:, 2].tolist()),
                                           "sup |V - alpha|": (tab[:, 0].tolist(), tab[:, 1].tolist())},
                  "cell corrector decay", "y2", "sup over level")
    if cfg.cell.H_list:
        stab = alpha_stability(profile, cfg.cell.H_list, cfg.cell_resolution())
        with open(out / "cell_alpha_stability.csv", "w") as fh:
            fh.write("H,alpha1,difference_to_previous\n")
            for i, (H, a) in enumerate(zip(stab.H, stab.alpha1)):
                d = f"{stab.differences[i - 1]:.17g}" if i else ""
                fh.write(f"{H:.17g},{a:.17g},{d}\n")
            fh.write(f"# extrapolated alpha1 {stab.extrapolated:.17g}\n")
    rate = "inf (identically small)" if fit.identically_small else f"{fit.rate:.6g}"
    print(f"alpha1 = {corr.alpha1:.17g}  decay rate = {rate}")
    return EXIT_OK


def cmd_steady(cfg: RunConfig) -> int:
    profile = cfg.build_profile()
    out = _outdir(cfg)
    sol = solve_steady(_case(cfg, profile), cfg.mesh_options(), cfg.solver_options())
    write_field(out / "steady_field.txt", sol.field, {"eps": cfg.flow.eps, "mode": cfg.flow.mode.value})
    with open(out / "steady_summary.csv", "w") as fh:
        fh.write("eps,flux,divergence,iterations\n")
        fh.write(f"{cfg.flow.eps:.17g},{sol.flux:.17g},{sol.divergence:.17g},{sol.iterations}\n")
    print(f"flux = {sol.flux:.17g}")
    return EXIT_OK


def cmd_unsteady(cfg: RunConfig) -> int:
    from .unsteady import UnsteadyConfig, run_decay

    profile = cfg.build_profile()
    out = _outdir(cfg)
    case = _case(cfg, profile)
    u = cfg.unsteady
    ucfg = UnsteadyConfig(case, u.initial, u.dt, u.T_end, u.delta, u.G_N, u.amplitude,
                          tuple(u.center) if u.center else None, u.radius, cfg.seed)
    steady = solve_steady(case, cfg.mesh_options(), cfg.solver_options())
    alpha1 = solve_cell(profile, cfg.cell.H, cfg.cell_resolution()).alpha1
    trace, final = run_decay(ucfg, steady, alpha1=alpha1)
    trace.write_csv(out / "decay_trace.csv")
    write_field(out / "final_field.txt", final, {"t": u.T_end})
    semilogy_plot(out / "decay_energy.svg", {"E": (trace.t, trace.E), "D": (trace.t, trace.D)},
                  "perturbation energy", "t", "E, D")
    lam = "n/a" if math.isnan(trace.lambda_t) else f"{trace.lambda_t:.6g} (R2 {trace.r2:.5f})"
    print(f"E(0) = {trace.E[0]:.6g}  E(T) = {trace.E[-1]:.6g}  lambda_t = {lam}  monotone = {trace.monotone()}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    from .analysis import COLUMNS, SweepConfig, run_sweep

    eps = cfg.sweep_eps()
    if len(eps) < 3:
        raise ConfigError(f"flow.eps_list has {len(eps)} values; need ≥3 for rate fit")
    profile = cfg.build_profile()
    out = _outdir(cfg)
    scfg = SweepConfig(profile, tuple(eps), cfg.flow.p0, cfg.flow.p1, cfg.flow.mode, cfg.mesh_options(),
                       cfg.cell.H, cfg.ell, cfg.solver_options())
    report = run_sweep(scfg, workers=cfg.workers)
    report.write_csv(out / "sweep.csv")
    (out / "sweep_summary.txt").write_text(report.summary())
    groups = {
        "errors_eff": ("e_L2_eff", "e_L1_eff"),
        "errors_W": ("e_L2_W", "e_H1_W"),
        "errors_perturbation": ("e_L2_pert_sq", "e_H1_pert_sq"),
        "side_layers": ("S_L1", "gradS_L1", "S_L2", "gradS_L2"),
    }
    for fname, cols in groups.items():
        series = {}
        for c in cols:
            pts = report.series(c)
            series[COLUMNS[c][0]] = ([e for e, _ in pts], [v for _, v in pts])
        loglog_plot(out / f"sweep_{fname}.svg", series, fname.replace("_", " "))
    sys.stdout.write(report.summary())
    return EXIT_NUMERIC if len(report.good_rows) < 3 else EXIT_OK


COMMANDS = {"cell": cmd_cell, "steady": cmd_steady, "unsteady": cmd_unsteady, "sweep": cmd_sweep, "check": cmd_check}


def _defaults_help() -> str:
    lines = ["configuration keys and defaults (YAML sections):"]
    for name, fld in RunConfig.model_fields.items():
        default = fld.default
        if isinstance(default, BaseModel):
            lines.append(f"  {name}:")
            for k, v in default.model_dump(mode="json").items():
                lines.append(f"    {k}: {v}")
        else:
            lines.append(f"  {name}: {default}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughwall", description="Rough-channel wall-law verification runs.",
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=_defaults_help())
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", help="output directory (overrides 'out')")
    p.add_argument("--workers", type=int, help="sweep worker processes (overrides 'workers')")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. --set flow.eps=0.0625")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    logging.captureWarnings(True)
    try:
        cfg = load_config(args.config, args.set, args.out, args.workers)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](cfg)
    except (ConfigError, ProfileError, MeshError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
