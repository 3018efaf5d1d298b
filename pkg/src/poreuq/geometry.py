"""Unit-cell geometry of the hierarchical nanoporous material.

The periodic cell is the rectangle ``[-a, a] x [0, b]``. Two mesopores of
radius ``R`` are centred at ``(0, 0)`` and ``(0, b)``; only their parts inside
the cell are kept, so the bottom and top edges of the cell are mesopore
symmetry lines and the side edges cut through the horizontal nanotunnels.
A vertical nanotube of diameter ``d`` joins the two mesopores over the gap of
length ``l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolation, DomainError

__all__ = [
    "PoreParams",
    "UnitCellGeometry",
    "PoreMask",
    "cell_dimensions",
    "nanotube_diameter_bound",
    "nanotube_length_bound",
    "goiter_diameter_bound",
    "pore_measures",
    "geometric_effectives",
    "rasterize_pore",
    "graded_edges",
]


@dataclass(frozen=True)
class PoreParams:
    """One realization of the pore-scale features.

    Attributes
    ----------
    R : float
        Mesopore radius (nm).
    theta : float
        Overlap angle between neighbouring mesopores (rad).
    d : float
        Nanotube diameter (nm).
    l : float
        Nanotube length (nm).
    """

    R: float
    theta: float
    d: float
    l: float

    @classmethod
    def from_array(cls, values) -> "PoreParams":
        R, theta, d, l = (float(v) for v in values)
        return cls(R, theta, d, l)

    def as_array(self) -> np.ndarray:
        return np.array([self.R, self.theta, self.d, self.l])

    def violations(self) -> list[str]:
        """Return a description of every violated invariant."""
        out = []
        if not self.R > 0:
            out.append(f"R must be positive (R={self.R})")
        if not 0 < self.theta < math.pi / 2:
            out.append(f"theta must lie in (0, pi/2) (theta={self.theta})")
        if not self.d > 0:
            out.append(f"d must be positive (d={self.d})")
        if not self.l > 0:
            out.append(f"l must be positive (l={self.l})")
        if out:
            return out
        if not self.d < nanotube_diameter_bound(self.R, self.theta):
            out.append("nanotube wider than the cell: d >= 2 R cos(theta)")
        elif not self.l > nanotube_length_bound(self.R, self.d):
            out.append("negative vertical gap: l <= 2R - sqrt(4R^2 - d^2)")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def check(self) -> "PoreParams":
        problems = self.violations()
        if problems:
            raise ConstraintViolation(f"{self}: " + "; ".join(problems))
        return self


def cell_dimensions(params: PoreParams) -> tuple[float, float]:
    """Half-width ``a`` and height ``b`` of the unit cell (nm)."""
    R, d = params.R, params.d
    if not d < 2 * R:
        raise DomainError(f"d={d} must be smaller than the mesopore diameter 2R={2 * R}")
    a = R * math.cos(params.theta)
    b = 2 * R * math.sqrt(1 - d * d / (4 * R * R)) + params.l
    return a, b


def nanotube_diameter_bound(R: float, theta: float) -> float:
    """Strict upper bound ``2 R cos(theta)`` on the nanotube diameter."""
    return 2 * R * math.cos(theta)


def nanotube_length_bound(R: float, d: float) -> float:
    """Strict lower bound on the nanotube length (zero vertical gap)."""
    if not 0 <= d < 2 * R:
        raise DomainError(f"need 0 <= d < 2R, got d={d}, R={R}")
    return 2 * R - math.sqrt(4 * R * R - d * d)


def goiter_diameter_bound(R: float, l: float) -> float:
    """Upper bound ``sqrt(4 l R - l^2)`` on ``d`` for a given tube length.

    For ``l < 2R`` this is the no-gap condition solved for ``d``. For
    ``l >= 2R`` the gap is positive for every ``d < 2R`` and the expression
    no longer encodes a constraint; see :func:`effective_goiter_bound`.
    """
    if not 0 < l < 4 * R:
        raise DomainError(f"need 0 < l < 4R, got l={l}, R={R}")
    return math.sqrt(4 * l * R - l * l)


def effective_goiter_bound(R, l):
    """Vectorized diameter bound implied by the no-gap condition.

    Equals ``sqrt(4 l R - l^2)`` when ``l < 2R`` and ``2R`` otherwise.
    """
    R = np.asarray(R, dtype=float)
    l = np.asarray(l, dtype=float)
    inside = l < 2 * R
    root = np.sqrt(np.where(inside, 4 * l * R - l * l, 0.0))
    return np.where(inside, root, 2 * R)


def pore_measures(R: float, theta: float, d: float, l: float) -> tuple[float, float]:
    """Analytic pore area and fluid-solid interface length of the cell.

    No constraint checks beyond what the formulas need, so limiting shapes
    (``theta = 0``, ``d = 0``, ``l = 0``) can be evaluated.

    Returns
    -------
    area : float
        Pore area (nm^2).
    interface : float
        Interface length (nm): four mesopore arcs between the cell side and
        the nanotube mouth plus the two nanotube walls.
    """
    if not 0 <= d < 2 * R:
        raise DomainError(f"need 0 <= d < 2R, got d={d}, R={R}")
    half = 0.5 * d
    mouth = math.sqrt(R * R - half * half)
    clipped_half_disk = R * R * (math.cos(theta) * math.sin(theta) + math.pi / 2 - theta)
    cap = R * R * math.asin(half / R) - half * mouth
    area = 2 * clipped_half_disk + d * l - 2 * cap
    interface = 4 * R * (math.acos(half / R) - theta) + 2 * l
    return area, interface


def geometric_effectives(params: PoreParams) -> tuple[float, float]:
    """Porosity and effective sorption rate constant ``geff`` (1/nm)."""
    params.check()
    a, b = cell_dimensions(params)
    area, interface = pore_measures(params.R, params.theta, params.d, params.l)
    return area / (2 * a * b), interface / area


@dataclass(frozen=True)
class UnitCellGeometry:
    """Pore region of the unit cell as a point-membership test."""

    R: float
    theta: float
    d: float
    l: float
    a: float
    b: float

    @classmethod
    def from_params(cls, params: PoreParams) -> "UnitCellGeometry":
        params.check()
        a, b = cell_dimensions(params)
        return cls(params.R, params.theta, params.d, params.l, a, b)

    @property
    def mouth(self) -> float:
        """Height at which the nanotube leaves the lower mesopore."""
        return math.sqrt(self.R**2 - self.d**2 / 4)

    def in_mesopore(self, x, y):
        r2 = self.R * self.R
        return (x * x + y * y <= r2) | (x * x + (y - self.b) ** 2 <= r2)

    def in_tube(self, x, y):
        return (np.abs(x) <= self.d / 2) & (y >= self.mouth) & (y <= self.b - self.mouth)

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside_cell = (np.abs(x) <= self.a) & (y >= 0) & (y <= self.b)
        return inside_cell & (self.in_mesopore(x, y) | self.in_tube(x, y))


@dataclass
class PoreMask:
    """Cell-centred rasterization of a rectangular periodic cell.

    Arrays are indexed ``[i, j]`` with ``i`` along the first coordinate.
    ``fluid`` marks cells whose centre lies in the pore space; ``tube``
    marks fluid cells that belong to the nanotube rather than a mesopore.

    ``x_edges`` and ``y_edges`` are optional cell-edge coordinates of a
    tensor-product grid; by default the cells are uniform over ``extent``.
    ``ap_x`` (shape ``(nx + 1, ny)``) and ``ap_y`` (shape ``(nx, ny + 1)``)
    are optional face apertures: the open fraction of each cell face. When
    omitted they are derived from ``fluid`` (a face is open when the cells
    on both sides are fluid, a boundary face when its cell is fluid).
    """

    fluid: np.ndarray
    extent: tuple[float, float, float, float]
    interface_length: float | None = None
    tube: np.ndarray | None = None
    ap_x: np.ndarray | None = None
    ap_y: np.ndarray | None = None
    x_edges: np.ndarray | None = None
    y_edges: np.ndarray | None = None
    porosity: float = field(init=False)

    def __post_init__(self):
        self.fluid = np.asarray(self.fluid, dtype=bool)
        if self.fluid.ndim != 2:
            raise ValueError("fluid indicator must be a 2-D array")
        nx, ny = self.fluid.shape
        x0, x1, y0, y1 = self.extent
        self.x_edges = _edges(self.x_edges, x0, x1, nx)
        self.y_edges = _edges(self.y_edges, y0, y1, ny)
        if self.tube is None:
            self.tube = np.zeros_like(self.fluid)
        else:
            self.tube = np.asarray(self.tube, dtype=bool) & self.fluid
        if (self.ap_x is None) != (self.ap_y is None):
            raise ValueError("give both face aperture arrays or neither")
        if self.ap_x is None:
            f = self.fluid.astype(float)
            self.ap_x = np.zeros((nx + 1, ny))
            self.ap_x[1:-1] = f[:-1] * f[1:]
            self.ap_x[0], self.ap_x[-1] = f[0], f[-1]
            self.ap_y = np.zeros((nx, ny + 1))
            self.ap_y[:, 1:-1] = f[:, :-1] * f[:, 1:]
            self.ap_y[:, 0], self.ap_y[:, -1] = f[:, 0], f[:, -1]
        else:
            self.ap_x = np.clip(np.asarray(self.ap_x, dtype=float), 0.0, 1.0)
            self.ap_y = np.clip(np.asarray(self.ap_y, dtype=float), 0.0, 1.0)
            if self.ap_x.shape != (nx + 1, ny) or self.ap_y.shape != (nx, ny + 1):
                raise ValueError("face aperture arrays do not match the grid")
        self.porosity = float(np.sum(self.cell_areas()[self.fluid]) / self.area)

    @property
    def active(self) -> np.ndarray:
        """Cells with at least one open face (the finite-volume unknowns)."""
        ax, ay = self.ap_x > 0, self.ap_y > 0
        return ax[:-1] | ax[1:] | ay[:, :-1] | ay[:, 1:]

    @property
    def shape(self) -> tuple[int, int]:
        return self.fluid.shape

    @property
    def resolution(self) -> tuple[int, int]:
        return self.fluid.shape

    @property
    def cell_size(self) -> tuple[float, float]:
        """Mean cell widths (the exact widths on a uniform grid)."""
        x0, x1, y0, y1 = self.extent
        nx, ny = self.fluid.shape
        return (x1 - x0) / nx, (y1 - y0) / ny

    def widths(self) -> tuple[np.ndarray, np.ndarray]:
        return np.diff(self.x_edges), np.diff(self.y_edges)

    def cell_areas(self) -> np.ndarray:
        dx, dy = self.widths()
        return np.outer(dx, dy)

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.extent
        return (x1 - x0) * (y1 - y0)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return (0.5 * (self.x_edges[1:] + self.x_edges[:-1]),
                0.5 * (self.y_edges[1:] + self.y_edges[:-1]))


def _edges(edges, lo, hi, n):
    if edges is None:
        return np.linspace(lo, hi, n + 1)
    edges = np.asarray(edges, dtype=float)
    if edges.shape != (n + 1,) or np.any(np.diff(edges) <= 0):
        raise ValueError("cell edges must be increasing with one more entry than cells")
    if not (np.isclose(edges[0], lo) and np.isclose(edges[-1], hi)):
        raise ValueError("cell edges must span the extent")
    return edges


def graded_edges(breaks, n: int, merge: float = 0.25) -> np.ndarray:
    """Mirror-symmetric piecewise-uniform edges through every break.

    ``breaks`` must be symmetric about the midpoint of its first and last
    entries; only the upper half is read. Each segment gets cells in
    proportion to its length (at least one). Breaks closer than ``merge``
    nominal cells to their inner neighbour or to the end are dropped, so no
    sliver cells appear. The result is exactly antisymmetric about the
    midpoint.
    """
    breaks = np.asarray(breaks, dtype=float)
    lo, hi = breaks[0], breaks[-1]
    mid = 0.5 * (lo + hi)
    half = hi - mid
    h = (hi - lo) / n
    kept, prev = [], 0.0
    for t in np.sort(breaks[(breaks > mid) & (breaks < hi)] - mid):
        gap = 2 * t if not kept else t - prev
        if gap >= merge * h and half - t >= merge * h:
            kept.append(t)
            prev = t
    if not kept:
        return mid + np.linspace(-half, half, n + 1)
    kept = np.asarray(kept + [half])
    outer = np.diff(kept)
    exact = n * outer / (hi - lo)
    counts = np.maximum(1, np.rint(exact).astype(int))
    while n - 2 * counts.sum() < 1:
        if not np.any(counts > 1):
            return mid + np.linspace(-half, half, n + 1)
        counts[np.argmax(np.where(counts > 1, counts - exact, -np.inf))] -= 1
    inner = n - 2 * counts.sum()
    upper = np.concatenate([np.linspace(a, b, c + 1)[1:]
                            for a, b, c in zip(kept[:-1], kept[1:], counts)])
    off = np.concatenate([-upper[::-1], np.linspace(-kept[0], kept[0], inner + 1), upper])
    off = 0.5 * (off - off[::-1])
    return mid + off


def rasterize_pore(params: PoreParams, resolution: int) -> PoreMask:
    """Rasterize the pore space of ``params`` on a ``resolution``-square grid.

    The grid is uniform between the corner coordinates of the pore (the tube
    walls, the tube mouths and the edges of the side openings), which are
    always grid lines, so these singular points sit on cell corners at every
    resolution. A cell is fluid when its centre lies in the pore region. Face
    apertures are the exact open fractions of each face, so the transport
    problem sees the true wall position rather than a staircase. The
    interface length stored on the mask is the analytic value.
    """
    if int(resolution) != resolution or resolution < 16:
        raise ValueError(f"resolution must be an integer >= 16, got {resolution}")
    n = int(resolution)
    geom = UnitCellGeometry.from_params(params)
    a, b, half = geom.a, geom.b, 0.5 * geom.d
    side = geom.R * math.sin(geom.theta)
    xe = graded_edges([-a, -half, half, a], n)
    ye = graded_edges([0.0, side, geom.mouth, b - geom.mouth, b - side, b], n)
    xc = 0.5 * (xe[1:] + xe[:-1])
    yc = 0.5 * (ye[1:] + ye[:-1])
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    meso = geom.in_mesopore(X, Y)
    fluid = meso | geom.in_tube(X, Y)
    _, interface = pore_measures(params.R, params.theta, params.d, params.l)
    ap_x, ap_y = _face_apertures(geom, xe, ye)
    return PoreMask(fluid, (-a, a, 0.0, b), interface_length=interface, tube=fluid & ~meso,
                    ap_x=ap_x, ap_y=ap_y, x_edges=xe, y_edges=ye)


def _overlap(lo, hi, a, b):
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def _face_apertures(geom: UnitCellGeometry, xe, ye):
    """Open fraction of every grid face of the pore in ``geom``."""
    R, a, b = geom.R, geom.a, geom.b
    half = 0.5 * geom.d
    mouth = geom.mouth
    # x-faces: the pore section at fixed x is [0, c] U [b - c, b], or all of
    # [0, b] inside the tube
    c = np.sqrt(np.clip(R * R - xe * xe, 0.0, None))[:, None]
    lo, hi = ye[None, :-1], ye[None, 1:]
    ov = (_overlap(lo, hi, 0.0, c) + _overlap(lo, hi, b - c, b)
          - _overlap(lo, hi, b - c, np.minimum(c, b)))
    ov = np.where((np.abs(xe) <= half)[:, None], hi - lo, ov)
    ap_x = ov / (hi - lo)
    # y-faces: the pore section at fixed y is the centred interval [-w, w]
    w = np.maximum(np.sqrt(np.clip(R * R - ye * ye, 0.0, None)),
                   np.sqrt(np.clip(R * R - (b - ye) ** 2, 0.0, None)))
    w = np.where((ye >= mouth) & (ye <= b - mouth), np.maximum(w, half), w)
    w = np.minimum(w, a)[None, :]
    lo, hi = xe[:-1, None], xe[1:, None]
    ap_y = _overlap(lo, hi, -w, w) / (hi - lo)
    return ap_x, ap_y
