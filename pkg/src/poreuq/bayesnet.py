"""Prior models over the pore-scale parameters and their Rosenblatt maps.

Three priors are available:

``p0``
    Independent uniform priors on every parameter.
``p1``
    Causal network R -> d <- theta, (R, d) -> l. The nanotube diameter is
    capped by the cell width and the length by the zero-gap condition.
``p2``
    Causal network with l a root: (R, theta, l) -> d, ordering (R, theta, l, d).

All maps are vectorized: ``z`` and ``theta`` arrays have shape ``(n, 4)`` or
``(4,)``. Parameter columns are always stored in the order (R, theta, d, l);
for ``p2`` the z-columns follow the sampling order (R, theta, l, d).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng
from .errors import DegenerateSampleError, EmptySupportError, OutOfSupportError
from .geometry import effective_goiter_bound

PARAMS = ("R", "theta", "d", "l")
MODELS = ("p0", "p1", "p2")

__all__ = [
    "PARAMS",
    "HyperRanges",
    "NARROW",
    "PHYSICAL",
    "PriorModel",
    "SampleBatch",
    "rosenblatt_inverse",
    "rosenblatt_forward",
    "sample_parameters",
    "constraint_flags",
    "empirical_correlation",
    "marginal_density",
]


@dataclass(frozen=True)
class HyperRanges:
    """Lower and upper hyperparameter bounds for each pore-scale parameter."""

    R_minus: float
    R_plus: float
    theta_minus: float
    theta_plus: float
    d_minus: float
    d_plus: float
    l_minus: float
    l_plus: float

    def __post_init__(self):
        for p in PARAMS:
            lo, hi = self.bounds(p)
            if not (lo > 0 and hi > lo):
                raise ValueError(f"bad range for {p}: [{lo}, {hi}]")

    def bounds(self, param: str) -> tuple[float, float]:
        return getattr(self, f"{param}_minus"), getattr(self, f"{param}_plus")

    def lower(self) -> np.ndarray:
        return np.array([self.bounds(p)[0] for p in PARAMS])

    def upper(self) -> np.ndarray:
        return np.array([self.bounds(p)[1] for p in PARAMS])

    @classmethod
    def from_mapping(cls, mapping) -> "HyperRanges":
        kw = {}
        for p in PARAMS:
            lo, hi = mapping[p]
            kw[f"{p}_minus"], kw[f"{p}_plus"] = float(lo), float(hi)
        return cls(**kw)

    def to_mapping(self) -> dict:
        return {p: list(self.bounds(p)) for p in PARAMS}


NARROW = HyperRanges(10.0, 60.0, 0.07, 0.7, 4.0, 8.0, 8.0, 18.0)
PHYSICAL = HyperRanges(10.0, 60.0, 0.05 * math.pi, 0.4 * math.pi, 5.0, 60.0, 1.0, 60.0)
PRESETS = {"narrow": NARROW, "physical": PHYSICAL}


@dataclass(frozen=True)
class PriorModel:
    """A prior over (R, theta, d, l) defined by a network tag and ranges."""

    tag: str
    ranges: HyperRanges = NARROW

    def __post_init__(self):
        tag = self.tag.lower()
        if tag not in MODELS:
            raise ValueError(f"unknown model {self.tag!r}; expected one of {MODELS}")
        object.__setattr__(self, "tag", tag)

    @property
    def order(self) -> tuple[int, ...]:
        """Parameter column for each z-coordinate."""
        return (0, 1, 3, 2) if self.tag == "p2" else (0, 1, 2, 3)

    @property
    def roots(self) -> tuple[str, ...]:
        """Parameters with an unconditional uniform prior."""
        return {"p0": PARAMS, "p1": ("R", "theta"), "p2": ("R", "theta", "l")}[self.tag]

    @property
    def constrained(self) -> bool:
        return self.tag != "p0"


def _affine(z, lo, hi):
    return lo + z * (hi - lo)


def _cdf(x, lo, hi):
    return (x - lo) / (hi - lo)


def _check_interval(lo, hi, what):
    bad = ~(hi > lo)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise EmptySupportError(
            f"empty conditional support for {what} at row {i}: "
            f"[{np.broadcast_to(lo, bad.shape)[i]}, {np.broadcast_to(hi, bad.shape)[i]}]"
        )


def _d_upper(model: PriorModel, R, theta, l=None):
    r = model.ranges
    up = np.minimum(2 * R * np.cos(theta), r.d_plus)
    if model.tag == "p2":
        up = np.minimum(up, effective_goiter_bound(R, l))
    return up


def _l_lower(model: PriorModel, R, d):
    gap = 2 * R - np.sqrt(np.maximum(4 * R * R - d * d, 0.0))
    return np.maximum(model.ranges.l_minus, gap)


def _as_rows(a):
    a = np.asarray(a, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != 4:
        raise ValueError(f"expected 4 columns, got shape {a.shape}")
    return a, single


def rosenblatt_inverse(model: PriorModel, z) -> np.ndarray:
    """Map decorrelated coordinates in [0, 1]^4 to pore parameters.

    Returns an array of (R, theta, d, l) with the same leading shape as ``z``.
    """
    z, single = _as_rows(z)
    if np.any((z < 0) | (z > 1)):
        raise OutOfSupportError("z must lie in [0, 1]^4")
    r = model.ranges
    R = _affine(z[:, 0], r.R_minus, r.R_plus)
    theta = _affine(z[:, 1], r.theta_minus, r.theta_plus)
    if model.tag == "p0":
        d = _affine(z[:, 2], r.d_minus, r.d_plus)
        l = _affine(z[:, 3], r.l_minus, r.l_plus)
    elif model.tag == "p1":
        d_up = _d_upper(model, R, theta)
        _check_interval(r.d_minus, d_up, "d")
        d = _affine(z[:, 2], r.d_minus, d_up)
        l_lo = _l_lower(model, R, d)
        _check_interval(l_lo, r.l_plus, "l")
        l = _affine(z[:, 3], l_lo, r.l_plus)
    else:
        l = _affine(z[:, 2], r.l_minus, r.l_plus)
        d_up = _d_upper(model, R, theta, l)
        _check_interval(r.d_minus, d_up, "d")
        d = _affine(z[:, 3], r.d_minus, d_up)
    out = np.column_stack([R, theta, d, l])
    return out[0] if single else out


def rosenblatt_forward(model: PriorModel, theta, atol: float = 1e-12) -> np.ndarray:
    """Map pore parameters to decorrelated coordinates (conditional CDFs)."""
    th, single = _as_rows(theta)
    r = model.ranges
    R, ang, d, l = th.T
    z1 = _cdf(R, r.R_minus, r.R_plus)
    z2 = _cdf(ang, r.theta_minus, r.theta_plus)
    if model.tag == "p0":
        z3 = _cdf(d, r.d_minus, r.d_plus)
        z4 = _cdf(l, r.l_minus, r.l_plus)
    elif model.tag == "p1":
        d_up = _d_upper(model, R, ang)
        _check_interval(r.d_minus, d_up, "d")
        z3 = _cdf(d, r.d_minus, d_up)
        l_lo = _l_lower(model, R, d)
        _check_interval(l_lo, r.l_plus, "l")
        z4 = _cdf(l, l_lo, r.l_plus)
    else:
        z3 = _cdf(l, r.l_minus, r.l_plus)
        d_up = _d_upper(model, R, ang, l)
        _check_interval(r.d_minus, d_up, "d")
        z4 = _cdf(d, r.d_minus, d_up)
    z = np.column_stack([z1, z2, z3, z4])
    outside = (z < -atol) | (z > 1 + atol)
    if np.any(outside):
        i, j = np.argwhere(outside)[0]
        raise OutOfSupportError(f"row {i}: conditional CDF {j + 1} = {z[i, j]} outside [0, 1]")
    return z[0] if single else z


def constraint_flags(theta, goiter: bool = False) -> np.ndarray:
    """True for rows that satisfy every pore-geometry invariant.

    With ``goiter=True`` the diameter must also stay below the no-gap bound
    ``sqrt(4 l R - l^2)`` wherever that bound is active (``l < 2R``).
    """
    th, single = _as_rows(theta)
    R, ang, d, l = th.T
    ok = (R > 0) & (ang > 0) & (ang < np.pi / 2) & (d > 0) & (l > 0)
    with np.errstate(invalid="ignore"):
        ok &= d < 2 * R * np.cos(ang)
        ok &= l > 2 * R - np.sqrt(4 * R * R - d * d)
        if goiter:
            ok &= d < effective_goiter_bound(R, l)
    return ok[0] if single else ok


@dataclass
class SampleBatch:
    """A batch of prior samples with their decorrelated coordinates."""

    model: PriorModel
    z: np.ndarray
    theta: np.ndarray
    valid: np.ndarray
    seed: int
    start: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.n)

    def column(self, param: str) -> np.ndarray:
        return self.theta[:, PARAMS.index(param)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "z1", "z2", "z3", "z4", *PARAMS, "valid"])
            for i, zr, tr, ok in zip(self.index, self.z, self.theta, self.valid):
                w.writerow([int(i), *map(repr, map(float, zr)), *map(repr, map(float, tr)),
                            int(ok)])


def sample_parameters(model: PriorModel, n: int, seed: int, start: int = 0,
                      stream: str = "sample") -> SampleBatch:
    """Draw ``n`` prior samples; row ``i`` depends only on ``(seed, start + i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = rng.uniforms(seed, stream, n, 4, start=start)
    theta = rosenblatt_inverse(model, z)
    valid = constraint_flags(theta, goiter=model.tag == "p2")
    if model.tag == "p0" and not valid.all():
        warnings.warn(
            f"{np.count_nonzero(~valid)} of {n} independent-prior samples violate the "
            "pore-geometry constraints; they are flagged in 'valid'",
            stacklevel=2,
        )
    return SampleBatch(model, z, theta, valid, int(seed), int(start))


def empirical_correlation(batch) -> np.ndarray:
    """Pearson correlation matrix of the parameter columns."""
    theta = batch.theta if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    if theta.shape[0] < 2:
        raise DegenerateSampleError("need at least two samples")
    sd = theta.std(axis=0)
    if np.any(sd == 0):
        raise DegenerateSampleError("a parameter column has zero variance")
    c = np.clip(np.corrcoef(theta, rowvar=False), -1.0, 1.0)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


@lru_cache(maxsize=32)
def _marginal_kde(model: PriorModel, param: str, n: int, seed: int, grid_size: int):
    from .density import isj_bandwidth, kde_1d

    x = sample_parameters(model, n, seed, stream="marginal").column(param)
    return kde_1d(x, isj_bandwidth(x), grid_size=grid_size)


def marginal_density(model: PriorModel, param: str, value, mode: str = "auto",
                     n: int = 100_000, seed: int = 0, grid_size: int = 512):
    """Marginal prior density of one parameter.

    Parameters
    ----------
    mode : {'auto', 'uniform', 'kde'}
        'auto' uses the exact uniform density for root parameters and a KDE of
        ``n`` prior samples for conditioned ones. 'uniform' always uses the
        hyper-range density, 'kde' always uses the estimate.
    """
    if param not in PARAMS:
        raise ValueError(f"unknown parameter {param!r}")
    value = np.asarray(value, dtype=float)
    if mode == "auto":
        mode = "uniform" if param in model.roots else "kde"
    if mode == "uniform":
        lo, hi = model.ranges.bounds(param)
        return np.where((value >= lo) & (value <= hi), 1.0 / (hi - lo), 0.0)
    if mode != "kde":
        raise ValueError(f"unknown mode {mode!r}")
    return _marginal_kde(model, param, int(n), int(seed), int(grid_size))(value)
