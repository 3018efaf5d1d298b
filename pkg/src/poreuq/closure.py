"""Closure problem on the rasterized unit cell and effective coefficients.

For each direction ``j`` the closure variable solves

    div(D (grad chi_j + e_j)) = 0      in the pore,
    n . D (grad chi_j + e_j) = 0       on fluid-solid walls,

with ``chi_1 = 0`` on the cell sides (zero normal derivative top/bottom) and
``chi_2 = 0`` on top/bottom (zero normal derivative on the sides). The
discretization is a cell-centred finite-volume scheme on the active cells of
a :class:`~poreuq.geometry.PoreMask`. Each face conducts in proportion to its
open fraction (aperture), so cut cells follow the true wall instead of a
staircase; closed faces carry no flux and the wall condition holds exactly
at the discrete level.

The effective tensor is integrated face by face,

    |Y| D_eff^{ij} = sum_{faces normal to i} D_f len_f (delta_ij dist_f + dchi_j),

which is the midpoint rule on the dual cells of the scheme. It reproduces
layered media exactly: a straight channel along ``e_i`` gives its volume
fraction in that direction and zero across it.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from . import _kernels
from .errors import ConvergenceError, DisconnectedPoreError
from .geometry import PoreMask, PoreParams, geometric_effectives, rasterize_pore

log = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 128
DEFAULT_TOL = 1e-8

__all__ = [
    "DiffusivityField",
    "ClosureField",
    "EffectiveProps",
    "assemble_closure",
    "solve_closure",
    "effective_tensor",
    "forward_model",
]


@dataclass(frozen=True)
class DiffusivityField:
    """Dimensionless diffusivities: mesopores normalized to 1, nanotube ratio."""

    mesopore: float = 1.0
    tube_ratio: float = 1.0

    def __post_init__(self):
        if not (self.mesopore > 0 and self.tube_ratio > 0):
            raise ValueError("diffusivities must be strictly positive")

    def cell_values(self, mask: PoreMask) -> np.ndarray:
        D = np.full(mask.shape, self.mesopore)
        D[mask.tube] = self.mesopore * self.tube_ratio
        return D


@dataclass
class ClosureField:
    """Solved closure variables on the active cells (NaN elsewhere)."""

    mask: PoreMask
    chi: np.ndarray  # shape (2, nx, ny)
    bc: str
    iterations: tuple
    residuals: tuple
    histories: tuple = field(repr=False)
    converged: tuple = (True, True)

    @property
    def chi1(self) -> np.ndarray:
        return self.chi[0]

    @property
    def chi2(self) -> np.ndarray:
        return self.chi[1]

    def means(self) -> np.ndarray:
        """Pore integral of each component divided by the cell area."""
        areas = self.mask.cell_areas()
        return np.array([np.nansum(c * areas) / self.mask.area for c in self.chi])

    def to_csv(self, directory) -> None:
        """Dump the mask and both components as dense ``ny x nx`` grids."""
        os.makedirs(directory, exist_ok=True)
        grids = {"mask": self.mask.fluid.astype(float), "chi1": self.chi[0], "chi2": self.chi[1]}
        for name, g in grids.items():
            with open(os.path.join(directory, f"{name}.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                for row in g.T:
                    w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


@dataclass(frozen=True)
class EffectiveProps:
    """Darcy-scale effective coefficients of one unit cell."""

    DL: float
    DT: float
    geff: float
    porosity: float

    def as_dict(self) -> dict:
        return {"DL": self.DL, "DT": self.DT, "geff": self.geff, "porosity": self.porosity}


@dataclass
class _Faces:
    """Open faces of one direction: owner ``p``, neighbour ``q`` (or -1)."""

    p: np.ndarray
    q: np.ndarray
    D: np.ndarray  # face diffusivity times aperture
    sign: np.ndarray  # +1 if the face normal from p points along +axis
    dist: np.ndarray  # centre-to-centre (or centre-to-side) distance, the dual width
    length: np.ndarray


def _harmonic(a, b):
    return 2 * a * b / (a + b)


def _axis_faces(index, D, ap, axis, dirichlet, periodic, widths):
    """Enumerate open faces normal to ``axis``.

    ``index`` holds the unknown number of each active cell (-1 elsewhere),
    ``ap`` the face apertures (one more entry than cells along ``axis``) and
    ``widths`` the cell widths along both axes.
    """
    idx = np.moveaxis(index, axis, 0)
    Dm = np.moveaxis(D, axis, 0)
    am = np.moveaxis(ap, axis, 0)
    w = widths[axis][:, None]
    length = np.broadcast_to(widths[1 - axis][None, :], idx.shape)
    a, b = idx[:-1], idx[1:]
    inner = am[1:-1]
    both = (a >= 0) & (b >= 0) & (inner > 0)
    p_list = [a[both]]
    q_list = [b[both]]
    D_list = [_harmonic(Dm[:-1][both], Dm[1:][both]) * inner[both]]
    sign = [np.ones(p_list[0].size)]
    dist = [np.broadcast_to(0.5 * (w[:-1] + w[1:]), both.shape)[both]]
    len_list = [length[1:][both]]
    if periodic:
        lo, hi = idx[0], idx[-1]
        wrap = (lo >= 0) & (hi >= 0) & (am[0] > 0)
        p_list.append(hi[wrap])
        q_list.append(lo[wrap])
        D_list.append(_harmonic(Dm[-1][wrap], Dm[0][wrap]) * am[0][wrap])
        sign.append(np.ones(np.count_nonzero(wrap)))
        dist.append(np.full(np.count_nonzero(wrap), 0.5 * (w[0, 0] + w[-1, 0])))
        len_list.append(length[0][wrap])
    elif dirichlet:
        for edge, s in ((0, -1.0), (-1, 1.0)):
            cells = idx[edge]
            open_ = (cells >= 0) & (am[edge] > 0)
            p_list.append(cells[open_])
            q_list.append(np.full(np.count_nonzero(open_), -1))
            D_list.append(Dm[edge][open_] * am[edge][open_])
            sign.append(np.full(np.count_nonzero(open_), s))
            dist.append(np.full(np.count_nonzero(open_), 0.5 * w[edge, 0]))
            len_list.append(length[edge][open_])
    cat = np.concatenate
    return _Faces(cat(p_list), cat(q_list).astype(np.int64), cat(D_list), cat(sign),
                  cat(dist), cat(len_list))


def _components(fluid, periodic):
    labels, count = ndimage.label(fluid)
    if periodic and count > 1:
        parent = list(range(count + 1))

        def find(u):
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        for a, b in ((labels[0, :], labels[-1, :]), (labels[:, 0], labels[:, -1])):
            for u, v in zip(a, b):
                if u and v:
                    parent[find(u)] = find(v)
        roots = {find(u) for u in range(1, count + 1)}
        count = len(roots)
    return count


@dataclass
class _System:
    A: sp.csr_matrix
    rhs: np.ndarray
    faces: tuple  # (_Faces along x, _Faces along y)
    index: np.ndarray
    floating: np.ndarray  # pinned unknowns (one per floating component)
    labels: np.ndarray  # connected component of every unknown


def assemble_closure(mask: PoreMask, D: DiffusivityField | None = None, j: int = 0,
                     bc: str = "mixed") -> _System:
    """Assemble the finite-volume system for closure component ``j`` (0 or 1)."""
    if bc not in ("mixed", "periodic"):
        raise ValueError(f"unknown boundary mode {bc!r}")
    D = D or DiffusivityField()
    active = mask.active
    n = int(active.sum())
    index = np.full(active.shape, -1, dtype=np.int64)
    index[active] = np.arange(n)
    Dc = D.cell_values(mask)
    widths = mask.widths()
    periodic = bc == "periodic"
    # mixed mode: chi_1 is pinned on the sides (axis 0), chi_2 on top/bottom (axis 1)
    fx = _axis_faces(index, Dc, mask.ap_x, 0, dirichlet=(j == 0), periodic=periodic, widths=widths)
    fy = _axis_faces(index, Dc, mask.ap_y, 1, dirichlet=(j == 1), periodic=periodic, widths=widths)

    diag = np.zeros(n)
    rhs = np.zeros(n)
    rows, cols, vals = [], [], []
    for f, axis in ((fx, 0), (fy, 1)):
        c = f.D * f.length / f.dist
        np.add.at(diag, f.p, c)
        inner = f.q >= 0
        np.add.at(diag, f.q[inner], c[inner])
        rows += [f.p[inner], f.q[inner]]
        cols += [f.q[inner], f.p[inner]]
        vals += [-c[inner], -c[inner]]
        if axis == j:
            flux = f.D * f.length
            np.add.at(rhs, f.p, flux * f.sign)
            np.add.at(rhs, f.q[inner], -flux[inner] * f.sign[inner])

    # components with no Dirichlet contact are defined up to a constant: pin one cell
    graph = sp.csr_matrix((np.ones(sum(r.size for r in rows)),
                           (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    ncomp, lab = sp.csgraph.connected_components(graph, directed=False)
    anchored = np.zeros(ncomp, dtype=bool)
    for f in (fx, fy):
        anchored[lab[f.p[f.q < 0]]] = True
    floating = np.array([np.flatnonzero(lab == k)[0] for k in range(ncomp) if not anchored[k]],
                        dtype=np.int64)

    r = np.concatenate(rows + [np.arange(n)])
    cc = np.concatenate(cols + [np.arange(n)])
    v = np.concatenate(vals + [diag])
    if floating.size:
        pin = np.zeros(n, dtype=bool)
        pin[floating] = True
        keep = ~(pin[r] | pin[cc])
        r = np.concatenate([r[keep], floating])
        cc = np.concatenate([cc[keep], floating])
        v = np.concatenate([v[keep], np.ones(floating.size)])
        rhs[floating] = 0.0
    A = sp.csr_matrix((v, (r, cc)), shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    return _System(A, rhs, (fx, fy), index, floating, lab)


def solve_closure(mask: PoreMask, D: DiffusivityField | None = None, tol: float = DEFAULT_TOL,
                  bc: str = "mixed", maxiter: int | None = None, backend=None,
                  strict: bool = True) -> ClosureField:
    """Solve both closure components on ``mask``.

    Parameters
    ----------
    tol : float
        Relative residual ``||A chi - s|| / ||s||`` at which iteration stops.
    bc : {'mixed', 'periodic'}
        Mixed Dirichlet/Neumann sides (default) or full periodicity.
    maxiter : int, optional
        Iteration cap, default ten times the number of unknowns.
    strict : bool
        Raise :class:`ConvergenceError` when the cap is hit.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if _components(mask.active, bc == "periodic") != 1:
        raise DisconnectedPoreError("pore space must be a single 4-connected region")
    D = D or DiffusivityField()
    k = _kernels.get_backend(backend)
    chi = np.full((2,) + mask.shape, np.nan)
    its, res, hist, conv = [], [], [], []
    for j in (0, 1):
        s = assemble_closure(mask, D, j, bc)
        n = s.rhs.size
        cap = int(maxiter) if maxiter is not None else 10 * n
        inv_diag = 1.0 / s.A.diagonal()
        x, it, h, ok = k.pcr_solve(s.A.indptr.astype(np.int32), s.A.indices.astype(np.int32),
                                   s.A.data, s.rhs, inv_diag, float(tol), cap)
        if not ok and strict:
            raise ConvergenceError(f"closure component {j + 1} did not converge in {it} iterations")
        bnorm = np.linalg.norm(s.rhs)
        rel = float(np.linalg.norm(s.A @ x - s.rhs) / bnorm) if bnorm > 0 else 0.0
        # normalizing condition: shift floating components to zero pore mean
        for p in s.floating:
            members = s.labels == s.labels[p]
            x[members] -= x[members].mean()
        field_j = chi[j]
        field_j[mask.active] = x
        its.append(int(it))
        res.append(rel)
        hist.append(np.asarray(h))
        conv.append(bool(ok))
        log.debug("closure %d: %d unknowns, %d iterations, residual %.3e", j + 1, n, it, rel)
    return ClosureField(mask, chi, bc, tuple(its), tuple(res), tuple(hist), tuple(conv))


def effective_tensor(chi: ClosureField, mask: PoreMask | None = None,
                     D: DiffusivityField | None = None, full: bool = False):
    """Effective diffusion tensor from a solved closure field.

    Returns ``(DL, DT)``, or the full 2x2 tensor when ``full=True``.
    """
    mask = mask or chi.mask
    D = D or DiffusivityField()
    values = [c[mask.active] for c in chi.chi]
    T = np.zeros((2, 2))
    for j in (0, 1):
        s = assemble_closure(mask, D, j, chi.bc)
        x = values[j]
        for i, f in enumerate(s.faces):
            xq = np.where(f.q >= 0, x[np.maximum(f.q, 0)], 0.0)
            # difference along +axis: neighbour minus owner, boundary value is zero
            dchi = np.where(f.q >= 0, xq - x[f.p], f.sign * (0.0 - x[f.p]))
            # flux times the dual-cell width
            T[i, j] = np.sum(f.D * f.length * ((1.0 if i == j else 0.0) * f.dist + dchi))
    T /= mask.area
    if full:
        return T
    return float(T[0, 0]), float(T[1, 1])


def forward_model(params: PoreParams, D: DiffusivityField | None = None,
                  resolution: int = DEFAULT_RESOLUTION, tol: float = DEFAULT_TOL,
                  bc: str = "mixed", backend=None) -> EffectiveProps:
    """Rasterize, solve the closure problem and collect the effective coefficients."""
    params.check()
    mask = rasterize_pore(params, resolution)
    field_ = solve_closure(mask, D, tol=tol, bc=bc, backend=backend)
    DL, DT = effective_tensor(field_, mask, D)
    porosity, geff = geometric_effectives(params)
    return EffectiveProps(DL, DT, geff, porosity)
