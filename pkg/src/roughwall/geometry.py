"""Rough-boundary profiles and structured curvilinear meshes.

A profile is a 1-periodic C² graph ``eta`` with ``-1 <= eta <= 0``. The rough
channel is ``{(x1, x2): 0 < x1 < 1, eps*eta(x1/eps) < x2 < 1}`` and the cell
strip is ``{(y1, y2): 0 < y1 < 1, eta(y1) < y2 < H}``.

Both meshes are logically rectangular. Every horizontal mesh line is a curve
``x2 = c_k * g(x1) + d_k`` where ``g`` is the (scaled) bottom curve, so the
geometry map of each cell is known in closed form and the line ``x2 = 0``
is always a mesh line.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class ProfileKind(str, Enum):
    FLAT = "flat"
    SHIFTED_FLAT = "shifted_flat"
    COSINE = "cosine"
    SUM_OF_COSINES = "sum_of_cosines"
    CUSTOM_SAMPLES = "custom_samples"


class ProfileError(ValueError):
    pass


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileSpec:
    """Parameters of a periodic bottom profile.

    ``amplitude`` is the depth ``d`` for ``shifted_flat`` and the peak-to-trough
    depth ``a`` for ``cosine`` (``eta = -a (1 - cos 2 pi y) / 2``).
    ``sum_of_cosines`` uses Fourier coefficients,
    ``eta = sum_k a_k (cos 2 pi k y - 1) + b_k sin 2 pi k y`` (k = 1, 2, ...),
    which keeps ``eta(0) = 0``. ``custom_samples`` are uniform samples of eta
    on ``[0, 1)`` interpolated by a periodic cubic spline.
    """

    kind: ProfileKind = ProfileKind.FLAT
    amplitude: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    samples: tuple[float, ...] = ()
    phase: float = 0.0
    mirror: bool = False
    pin_origin: bool = False
    collar: float = 0.1
    lipschitz_bound: float | None = None
    curvature_limit: float = 1.0e4

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        for name in ("cos_coeffs", "sin_coeffs", "samples"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def descriptor(self) -> str:
        parts = [self.kind.value]
        if self.kind in (ProfileKind.SHIFTED_FLAT, ProfileKind.COSINE):
            parts.append(f"a={self.amplitude:g}")
        if self.kind is ProfileKind.SUM_OF_COSINES:
            parts.append("cos=" + ",".join(f"{v:g}" for v in self.cos_coeffs))
            parts.append("sin=" + ",".join(f"{v:g}" for v in self.sin_coeffs))
        if self.kind is ProfileKind.CUSTOM_SAMPLES:
            parts.append(f"n={len(self.samples)}")
        if self.phase:
            parts.append(f"phase={self.phase:g}")
        if self.mirror:
            parts.append("mirrored")
        if self.pin_origin:
            parts.append(f"pinned(collar={self.collar:g})")
        return " ".join(parts)


def _pin_bump(y: np.ndarray, collar: float):
    """C² bump equal to 1 at integers, supported within ``collar`` of them."""
    r = y - np.round(y)
    u = r / collar
    inside = np.abs(u) < 1.0
    s = np.where(inside, 1.0 - u * u, 0.0)
    c = s**3
    dc = np.where(inside, -6.0 * u * s**2 / collar, 0.0)
    d2c = np.where(inside, (-6.0 * s**2 + 24.0 * u * u * s) / collar**2, 0.0)
    return c, dc, d2c


@dataclass(frozen=True)
class BoundaryProfile:
    """Evaluators for eta, eta' and eta'' built from a :class:`ProfileSpec`."""

    spec: ProfileSpec
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    def _raw(self, y: np.ndarray):
        spec = self.spec
        kind = spec.kind
        zero = np.zeros_like(y)
        if kind is ProfileKind.FLAT:
            return zero, zero, zero
        if kind is ProfileKind.SHIFTED_FLAT:
            d = spec.amplitude
            if not spec.pin_origin:
                return zero - d, zero, zero
            c, dc, d2c = _pin_bump(y, spec.collar)
            return -d * (1.0 - c), d * dc, d * d2c
        if kind is ProfileKind.CUSTOM_SAMPLES:
            yy = np.mod(y, 1.0)
            return self._spline(yy), self._spline(yy, 1), self._spline(yy, 2)
        if kind is ProfileKind.COSINE:
            a_k, b_k = (0.5 * spec.amplitude,), ()
        else:
            a_k, b_k = spec.cos_coeffs, spec.sin_coeffs
        eta, d1, d2 = zero.copy(), zero.copy(), zero.copy()
        for k, a in enumerate(a_k, start=1):
            w = TWO_PI * k
            eta += a * (np.cos(w * y) - 1.0)
            d1 -= a * w * np.sin(w * y)
            d2 -= a * w * w * np.cos(w * y)
        for k, b in enumerate(b_k, start=1):
            w = TWO_PI * k
            eta += b * np.sin(w * y)
            d1 += b * w * np.cos(w * y)
            d2 -= b * w * w * np.sin(w * y)
        return eta, d1, d2

    def _all(self, y):
        y = np.asarray(y, dtype=float)
        s = -1.0 if self.spec.mirror else 1.0
        t = s * y - self.spec.phase
        if self.spec.mirror:
            t = t + 1.0
        eta, d1, d2 = self._raw(t)
        return eta, s * d1, d2

    def eval(self, y):
        return self._all(y)[0]

    def deriv1(self, y):
        return self._all(y)[1]

    def deriv2(self, y):
        return self._all(y)[2]

    __call__ = eval

    @cached_property
    def _sampled(self) -> np.ndarray:
        return self.eval(np.linspace(0.0, 1.0, 4097))

    @property
    def depth(self) -> float:
        """``sup(-eta)``, the maximal bump depth."""
        return float(-self._sampled.min())

    @property
    def mean_depth(self) -> float:
        return float(-self._sampled[:-1].mean())

    @property
    def lipschitz(self) -> float:
        return float(np.abs(self.deriv1(np.linspace(0.0, 1.0, 4097))).max())

    @property
    def is_flat(self) -> bool:
        return bool(np.all(self._sampled == 0.0))

    @property
    def john_constants(self) -> tuple[float, None]:
        """(L, K). K plays no role for graphs and is left unset."""
        L = self.spec.lipschitz_bound
        return (self.lipschitz if L is None else L), None

    def descriptor(self) -> str:
        return self.spec.descriptor()

    def digest(self) -> str:
        return hashlib.sha256(repr(self.spec).encode()).hexdigest()[:16]

    def mirrored(self) -> "BoundaryProfile":
        return make_profile(replace(self.spec, mirror=not self.spec.mirror))

    def shifted(self, s: float) -> "BoundaryProfile":
        """Profile translated by ``s`` in y1: ``eta_new(y) = eta(y - s)``."""
        sign = -1.0 if self.spec.mirror else 1.0
        return make_profile(replace(self.spec, phase=(self.spec.phase + sign * s) % 1.0))


def make_profile(spec: ProfileSpec) -> BoundaryProfile:
    """Build and validate a boundary profile."""
    spline = None
    if spec.kind is ProfileKind.CUSTOM_SAMPLES:
        vals = np.asarray(spec.samples, dtype=float)
        n = vals.size
        if n < 8:
            raise ProfileError("custom_samples needs at least 8 samples")
        h = 1.0 / n
        second = (np.roll(vals, -1) - 2.0 * vals + np.roll(vals, 1)) / h**2
        if np.abs(second).max() > spec.curvature_limit:
            raise ProfileError(
                f"custom samples are not C^2: max second difference {np.abs(second).max():.3g} "
                f"exceeds curvature_limit {spec.curvature_limit:g}"
            )
        spline = CubicSpline(np.linspace(0.0, 1.0, n + 1), np.append(vals, vals[0]), bc_type="periodic")
    if spec.kind is ProfileKind.SHIFTED_FLAT and not spec.pin_origin and spec.amplitude < 0:
        raise ProfileError("shifted_flat depth must be nonnegative")
    if spec.pin_origin and not (0.0 < spec.collar < 0.5):
        raise ProfileError("pin collar must lie in (0, 0.5)")
    if not (0.0 <= spec.phase < 1.0):
        raise ProfileError("phase must lie in [0, 1)")
    prof = BoundaryProfile(spec, spline)
    s = prof._sampled
    if s.max() > 1e-12:
        raise ProfileError(f"profile rises above 0 (max eta = {s.max():.3g}); need -1 <= eta <= 0")
    if s.min() < -1.0 - 1e-12:
        raise ProfileError(f"profile drops below -1 (min eta = {s.min():.3g}); need -1 <= eta <= 0")
    return prof


def cosine_profile(a: float, phase: float = 0.0) -> BoundaryProfile:
    return make_profile(ProfileSpec(ProfileKind.COSINE, amplitude=a, phase=phase))


# --------------------------------------------------------------------------- meshes


@dataclass(frozen=True)
class Grading:
    """Vertical layer layout.

    ``n_rough`` layers fill the rough layer (skipped for flat profiles),
    ``n_wall`` uniform layers fill ``(0, wall_height * scale]`` where scale is
    eps for the channel and 1 for the strip, and the remaining layers grow
    geometrically to the top. With ``growth`` set and ``ny`` omitted, outer
    layers grow by that ratio up to ``cap`` (strip meshes only).
    """

    n_rough: int = 4
    n_wall: int = 16
    wall_height: float = 2.0
    growth: float | None = None
    cap: float = 0.5

    @classmethod
    def default_for(cls, ny: int, flat: bool) -> "Grading":
        n_rough = 0 if flat else max(2, round(ny / 8))
        n_wall = max(1, math.ceil(0.25 * ny) - n_rough)
        return cls(n_rough=n_rough, n_wall=n_wall)


def _geometric_layers(start: float, stop: float, first: float, n: int) -> np.ndarray:
    """``n`` layers on [start, stop] whose sizes grow geometrically from ``first``."""
    L = stop - start
    if n <= 0:
        raise MeshError("need at least one outer layer")
    if first * n >= L:
        return np.linspace(start, stop, n + 1)
    f = lambda r: first * (r**n - 1.0) / (r - 1.0) - L
    r = brentq(f, 1.0 + 1e-12, 10.0)
    sizes = first * r ** np.arange(n)
    z = start + np.concatenate([[0.0], np.cumsum(sizes)])
    z[-1] = stop
    return z


def _growth_layers(start: float, stop: float, first: float, growth: float, cap: float) -> np.ndarray:
    z = [start]
    h = first
    while z[-1] + h < stop - 0.25 * h:
        h = min(h * growth, cap)
        z.append(z[-1] + h)
    z.append(stop)
    return np.asarray(z)


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    """Logically rectangular mesh with curvilinear rows.

    Horizontal line ``k`` is ``x2 = line_c[k] * g(x1) + line_d[k]``; vertical
    lines are ``x1 = x_breaks[i]``. Cells are numbered row-major
    (``cell = j * nx + i``) and carry 9 biquadratic nodes in local order
    ``3 * b + a`` (a horizontal, b vertical) and 4 vertices ``2 * b + a``.
    """

    kind: str
    profile: BoundaryProfile
    scale: float
    x_breaks: np.ndarray
    line_c: np.ndarray
    line_d: np.ndarray
    n_rough: int
    periodic: bool
    top: float

    # ---- bottom curve g(x1) = scale * eta(x1 / scale)
    def g(self, x1):
        return self.scale * self.profile.eval(np.asarray(x1) / self.scale)

    def dg(self, x1):
        return self.profile.deriv1(np.asarray(x1) / self.scale)

    @property
    def nx(self) -> int:
        return self.x_breaks.size - 1

    @property
    def ny(self) -> int:
        return self.line_c.size - 1

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def width(self) -> float:
        return float(self.x_breaks[-1] - self.x_breaks[0])

    @cached_property
    def cell_col(self) -> np.ndarray:
        return np.tile(np.arange(self.nx), self.ny)

    @cached_property
    def cell_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.ny), self.nx)

    # ---- node tables
    @property
    def n1(self) -> int:
        return 2 * self.nx + 1

    @property
    def n2(self) -> int:
        return 2 * self.ny + 1

    @cached_property
    def node_logical(self) -> tuple[np.ndarray, np.ndarray]:
        """Logical (I, J) indices of all biquadratic nodes, I fastest."""
        J, I = np.meshgrid(np.arange(self.n2), np.arange(self.n1), indexing="ij")
        return I.ravel(), J.ravel()

    @cached_property
    def nodes(self) -> np.ndarray:
        I, J = self.node_logical
        xb = self.x_breaks
        x_line = np.empty(self.n1)
        x_line[0::2] = xb
        x_line[1::2] = 0.5 * (xb[:-1] + xb[1:])
        x1 = x_line[I]
        j = np.minimum(J // 2, self.ny - 1)
        t = 0.5 * (J - 2 * j)
        c = (1.0 - t) * self.line_c[j] + t * self.line_c[j + 1]
        d = (1.0 - t) * self.line_d[j] + t * self.line_d[j + 1]
        return np.column_stack([x1, c * self.g(x1) + d])

    @cached_property
    def cells(self) -> np.ndarray:
        i, j = self.cell_col, self.cell_row
        a = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2])
        b = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
        I = 2 * i[:, None] + a[None, :]
        J = 2 * j[:, None] + b[None, :]
        return J * self.n1 + I

    @cached_property
    def cell_vertices(self) -> np.ndarray:
        """Vertex numbering on the (nx+1) x (ny+1) grid."""
        i, j = self.cell_col, self.cell_row
        a = np.array([0, 1, 0, 1])
        b = np.array([0, 0, 1, 1])
        return (j[:, None] + b) * (self.nx + 1) + (i[:, None] + a)

    @cached_property
    def vertex_to_node(self) -> np.ndarray:
        jj, ii = np.meshgrid(np.arange(self.ny + 1), np.arange(self.nx + 1), indexing="ij")
        return (2 * jj.ravel()) * self.n1 + 2 * ii.ravel()

    @cached_property
    def periodic_pairs(self) -> np.ndarray:
        """(right, left) node pairs identified under periodicity (strips only)."""
        if not self.periodic:
            return np.zeros((0, 2), dtype=int)
        J = np.arange(self.n2)
        return np.column_stack([J * self.n1 + self.n1 - 1, J * self.n1])

    # ---- geometry
    def map(self, cells: np.ndarray, xi: np.ndarray, shared: bool | None = None):
        """Map reference points to physical space.

        ``cells`` has shape (n,), ``xi`` shape (n, 2) or (q, 2) broadcast over
        cells. Returns coordinates (..., 2) and the Jacobian factors
        ``(h, dx2_dxi1, dx2_dxi2)``; the determinant is ``h * dx2_dxi2``.
        """
        cells = np.asarray(cells)
        i = cells % self.nx
        j = cells // self.nx
        if shared is None:
            shared = xi.shape[0] != cells.shape[0]
        if shared:
            xi1 = xi[None, :, 0]
            xi2 = xi[None, :, 1]
            i, j = i[:, None], j[:, None]
        else:
            xi1, xi2 = xi[..., 0], xi[..., 1]
        x0 = self.x_breaks[i]
        h = self.x_breaks[i + 1] - x0
        x1 = x0 + h * xi1
        c0, c1 = self.line_c[j], self.line_c[j + 1]
        d0, d1 = self.line_d[j], self.line_d[j + 1]
        C = (1.0 - xi2) * c0 + xi2 * c1
        D = (1.0 - xi2) * d0 + xi2 * d1
        g = self.g(x1)
        dg = self.dg(x1)
        x2 = C * g + D
        j21 = h * dg * C
        j22 = g * (c1 - c0) + (d1 - d0)
        h = np.broadcast_to(h, x1.shape)
        return np.stack([x1, x2], axis=-1), (h, j21, j22)

    def row_lines(self, x1) -> np.ndarray:
        """Heights of all horizontal lines at abscissae ``x1`` -> (n, ny+1)."""
        x1 = np.asarray(x1, dtype=float)
        return self.line_c[None, :] * self.g(x1)[:, None] + self.line_d[None, :]

    def locate(self, pts: np.ndarray):
        """Cells and reference coordinates of physical points.

        Points are wrapped into ``[0, width)`` for periodic meshes. Points below
        the bottom curve or above the top return ``cell = -1``.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x1 = pts[:, 0].copy()
        x2 = pts[:, 1]
        if self.periodic:
            x1 = np.mod(x1 - self.x_breaks[0], self.width) + self.x_breaks[0]
        i = np.clip(np.searchsorted(self.x_breaks, x1, side="right") - 1, 0, self.nx - 1)
        x0 = self.x_breaks[i]
        xi1 = (x1 - x0) / (self.x_breaks[i + 1] - x0)
        lines = self.row_lines(x1)
        tol = 1e-12 * max(1.0, abs(self.top))
        # first row whose top line is above x2 (skips collapsed rows)
        above = lines[:, 1:] >= x2[:, None] - tol
        j = np.argmax(above, axis=1)
        lo = lines[np.arange(len(j)), j]
        hi = lines[np.arange(len(j)), j + 1]
        thick = hi - lo
        xi2 = np.where(thick > 0, (x2 - lo) / np.where(thick > 0, thick, 1.0), 0.0)
        outside = (x2 < lines[:, 0] - tol) | (x2 > lines[:, -1] + tol) | ~above.any(axis=1)
        cells = np.where(outside, -1, j * self.nx + i)
        xi = np.column_stack([np.clip(xi1, 0.0, 1.0), np.clip(xi2, 0.0, 1.0)])
        return cells, xi

    # ---- tags
    @cached_property
    def tags(self) -> dict[str, np.ndarray]:
        """Boundary node sets.

        Channel tags: GammaEps, Gamma1, Sigma0, Sigma1, Gamma0. Strip tags:
        Bottom, Top, Gamma0. Nodes lying on the bottom curve (including
        collapsed rough-layer edges where the layer has zero thickness) belong
        to the bottom set.
        """
        I, J = self.node_logical
        xy = self.nodes
        on_curve = np.abs(xy[:, 1] - self.g(xy[:, 0])) <= 1e-14 * max(1.0, self.scale)
        on_curve &= J <= 2 * self.n_rough
        bottom = (J == 0) | on_curve
        top = J == self.n2 - 1
        has_interface = self.n_rough > 0 or self.profile.is_flat
        gamma0 = np.flatnonzero(J == 2 * self.n_rough) if has_interface else np.array([], dtype=int)
        if self.kind == "strip":
            return {"Bottom": np.flatnonzero(bottom), "Top": np.flatnonzero(top), "Gamma0": gamma0}
        rough_side = ((I == 0) | (I == self.n1 - 1)) & (J < 2 * self.n_rough)
        bottom |= rough_side
        upper = J >= 2 * self.n_rough
        return {
            "GammaEps": np.flatnonzero(bottom),
            "Gamma1": np.flatnonzero(top),
            "Sigma0": np.flatnonzero((I == 0) & upper & ~bottom),
            "Sigma1": np.flatnonzero((I == self.n1 - 1) & upper & ~bottom),
            "Gamma0": gamma0,
        }

    # ---- diagnostics
    def check_jacobian(self, xi: np.ndarray) -> float:
        cells = np.arange(self.n_cells)
        _, (h, _, j22) = self.map(cells, xi, shared=True)
        det = h * j22
        if not np.all(det > 0):
            bad = cells[np.any(det <= 0, axis=1)]
            raise MeshError(f"nonpositive Jacobian in {bad.size} cells (first: {bad[:5].tolist()})")
        return float(det.min())

    def area(self) -> float:
        from .discretization import gauss_rule_2d

        xi, w = gauss_rule_2d(3)
        _, (h, _, j22) = self.map(np.arange(self.n_cells), xi, shared=True)
        return float(np.sum(h * j22 * w[None, :]))

    def digest(self) -> str:
        m = hashlib.sha256()
        m.update(np.ascontiguousarray(self.nodes).tobytes())
        m.update(np.ascontiguousarray(self.cells).tobytes())
        return m.hexdigest()[:16]

    def dump(self, path) -> None:
        """Plain-text node/cell dump: nodes (index x1 x2), then cells (index nodes... tag)."""
        xy = self.nodes
        with open(path, "w") as fh:
            fh.write(f"# {self.kind} mesh nx={self.nx} ny={self.ny} scale={self.scale!r} profile={self.profile.descriptor()}\n")
            fh.write(f"nodes {xy.shape[0]}\n")
            for k, (a, b) in enumerate(xy):
                fh.write(f"{k} {a:.17g} {b:.17g}\n")
            fh.write(f"cells {self.n_cells}\n")
            region = np.where(self.cell_row < self.n_rough, "rough", "core")
            for k, (nodes, tag) in enumerate(zip(self.cells, region)):
                fh.write(f"{k} {' '.join(map(str, nodes))} {tag}\n")


@dataclass(frozen=True, eq=False)
class ChannelMesh(StructuredMesh):
    @property
    def epsilon(self) -> float:
        return self.scale


@dataclass(frozen=True, eq=False)
class StripMesh(StructuredMesh):
    @property
    def H(self) -> float:
        return self.top


def _rough_lines(n_rough: int) -> tuple[np.ndarray, np.ndarray]:
    sigma = np.linspace(1.0, 0.0, n_rough + 1)
    return sigma, np.zeros_like(sigma)


def _check_inverse_integer(eps: float) -> int:
    if not (0.0 < eps <= 1.0):
        raise MeshError("epsilon must lie in (0, 1]")
    n = round(1.0 / eps)
    if abs(n * eps - 1.0) > 1e-12:
        raise MeshError(f"1/epsilon must be a positive integer (got epsilon={eps!r})")
    return n


def build_channel_mesh(
    profile: BoundaryProfile,
    eps: float,
    nx: int,
    ny: int,
    grading: Grading | None = None,
    min_cells_per_period: int = 4,
) -> ChannelMesh:
    """Mesh of the rough channel with a mesh line exactly at ``x2 = 0``."""
    periods = _check_inverse_integer(eps)
    if nx % periods:
        raise MeshError(f"nx={nx} is not a multiple of 1/epsilon={periods}")
    if nx // periods < min_cells_per_period:
        raise MeshError(f"nx/periods = {nx // periods} is below the minimum of {min_cells_per_period} cells per period")
    if abs(float(profile.eval(0.0))) > 1e-12:
        raise MeshError("the rough channel needs eta(0) = 0 so that (0, 0) lies on the boundary")
    flat = profile.is_flat
    grading = grading or Grading.default_for(ny, flat)
    n_rough = 0 if flat else grading.n_rough
    if not flat and n_rough < 1:
        raise MeshError("a rough profile needs at least one rough-layer row")
    n_outer = ny - n_rough - grading.n_wall
    if n_outer < 1:
        raise MeshError(f"ny={ny} too small for {n_rough} rough and {grading.n_wall} wall layers")
    wall_top = min(grading.wall_height * eps, 0.5)
    c_r, d_r = _rough_lines(n_rough)
    z_wall = np.linspace(0.0, wall_top, grading.n_wall + 1)
    z_out = _geometric_layers(wall_top, 1.0, wall_top / grading.n_wall, n_outer)
    z = np.concatenate([z_wall, z_out[1:]])
    line_c = np.concatenate([c_r[:-1], np.zeros_like(z)]) if n_rough else np.zeros_like(z)
    line_d = np.concatenate([d_r[:-1], z]) if n_rough else z
    mesh = ChannelMesh(
        kind="channel",
        profile=profile,
        scale=float(eps),
        x_breaks=np.linspace(0.0, 1.0, nx + 1),
        line_c=line_c,
        line_d=line_d,
        n_rough=n_rough,
        periodic=False,
        top=1.0,
    )
    from .discretization import gauss_rule_2d

    mesh.check_jacobian(gauss_rule_2d(3)[0])
    logger.debug("channel mesh eps=%g nx=%d ny=%d (rough %d, wall %d)", eps, nx, ny, n_rough, grading.n_wall)
    return mesh


def build_unit_square_mesh(n: int) -> ChannelMesh:
    """Uniform ``n x n`` mesh of the unit square (flat profile, eps = 1) for solver verification."""
    if n < 1:
        raise MeshError("n must be positive")
    mesh = ChannelMesh(
        kind="channel",
        profile=make_profile(ProfileSpec()),
        scale=1.0,
        x_breaks=np.linspace(0.0, 1.0, n + 1),
        line_c=np.zeros(n + 1),
        line_d=np.linspace(0.0, 1.0, n + 1),
        n_rough=0,
        periodic=False,
        top=1.0,
    )
    return mesh


def build_strip_mesh(
    profile: BoundaryProfile,
    H: float,
    nx: int,
    ny: int | None = None,
    grading: Grading | None = None,
) -> StripMesh:
    """Periodic mesh of the truncated cell strip ``eta(y1) < y2 < H``."""
    if H < 2.0:
        raise MeshError(f"truncation height H={H} is below 2")
    if nx < 8:
        raise MeshError("strip meshes need nx >= 8")
    flat_bottom = bool(np.ptp(profile._sampled) == 0.0)
    if grading is None:
        grading = Grading(growth=1.25) if ny is None else Grading.default_for(ny, flat_bottom)
    n_rough = 0 if flat_bottom else grading.n_rough
    wall_top = min(grading.wall_height, 0.5 * H)
    z_wall = np.linspace(0.0, wall_top, grading.n_wall + 1)
    first = wall_top / grading.n_wall
    if ny is None:
        if grading.growth is None:
            raise MeshError("either ny or grading.growth is required")
        z_out = _growth_layers(wall_top, H, first, grading.growth, grading.cap)
    else:
        z_out = _geometric_layers(wall_top, H, first, ny - n_rough - grading.n_wall)
    z = np.concatenate([z_wall, z_out[1:]])
    if flat_bottom:
        # constant bottom: straight rows y2 = (1 - z/H) * eta + z
        line_c = 1.0 - z / H
        line_d = z.copy()
    else:
        sigma = np.linspace(1.0, 0.0, n_rough + 1)
        line_c = np.concatenate([sigma[:-1], np.zeros_like(z)])
        line_d = np.concatenate([np.zeros(n_rough), z])
    mesh = StripMesh(
        kind="strip",
        profile=profile,
        scale=1.0,
        x_breaks=np.linspace(0.0, 1.0, nx + 1),
        line_c=line_c,
        line_d=line_d,
        n_rough=n_rough,
        periodic=True,
        top=float(H),
    )
    from .discretization import gauss_rule_2d

    mesh.check_jacobian(gauss_rule_2d(3)[0])
    return mesh
