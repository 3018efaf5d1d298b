"""Tensor-product Legendre polynomial chaos surrogates over Z in [0, 1]^4.

Each factor is the shifted Legendre polynomial ``sqrt(2k+1) P_k(2z - 1)``,
orthonormal under the uniform measure on [0, 1]. The multi-index set is the
full tensor grid ``alpha_i <= kappa_i``.
"""

from __future__ import annotations

import ast
import csv
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .bayesnet import PriorModel, rosenblatt_inverse
from .errors import DimensionMismatchError, RankDeficiencyError, ZeroVarianceError

log = logging.getLogger(__name__)

QOIS = ("DL", "DT", "geff")
FORMAT_TAG = "# poreuq-pce v1"
_CHUNK = 1 << 16

__all__ = [
    "QOIS",
    "PcBasis",
    "PcSurrogate",
    "legendre_factors",
    "basis_eval",
    "fit_coefficients",
    "pce_fit",
    "pce_eval",
    "sobol_first_order",
    "training_inputs",
    "design_weights",
]


def legendre_factors(z, order: int) -> np.ndarray:
    """Orthonormal shifted Legendre values, shape ``z.shape + (order + 1,)``."""
    x = 2 * np.asarray(z, dtype=float) - 1
    P = np.empty(x.shape + (order + 1,))
    P[..., 0] = 1.0
    if order >= 1:
        P[..., 1] = x
    for k in range(1, order):
        P[..., k + 1] = ((2 * k + 1) * x * P[..., k] - k * P[..., k - 1]) / (k + 1)
    return P * np.sqrt(2 * np.arange(order + 1) + 1)


@dataclass(frozen=True)
class PcBasis:
    """Full tensor multi-index set with per-dimension order bounds."""

    orders: tuple = (4, 4, 4, 4)

    def __post_init__(self):
        orders = tuple(int(k) for k in self.orders)
        if any(k < 0 for k in orders):
            raise ValueError("orders must be nonnegative")
        object.__setattr__(self, "orders", orders)

    @property
    def dim(self) -> int:
        return len(self.orders)

    @property
    def shape(self) -> tuple:
        return tuple(k + 1 for k in self.orders)

    @property
    def n_terms(self) -> int:
        return int(np.prod(self.shape))

    @property
    def multi_indices(self) -> np.ndarray:
        return np.array(list(itertools.product(*(range(k + 1) for k in self.orders))),
                        dtype=np.int64).reshape(-1, self.dim)


def _rows(z, dim):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != dim:
        raise DimensionMismatchError(f"expected {dim} columns, got {z.shape[1]}")
    return z, single


def basis_eval(basis: PcBasis, z) -> np.ndarray:
    """Basis values, shape ``(n, n_terms)`` (or ``(n_terms,)`` for one point)."""
    z, single = _rows(z, basis.dim)
    out = np.ones((z.shape[0], basis.n_terms))
    for d, k in enumerate(basis.orders):
        F = legendre_factors(z[:, d], k)
        out *= F[:, basis.multi_indices[:, d]]
    return out[0] if single else out


@dataclass
class PcSurrogate:
    """Fitted expansion: coefficients ordered like ``basis.multi_indices``."""

    basis: PcBasis
    coef: np.ndarray
    qoi: str = ""
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        if self.coef.shape != (self.basis.n_terms,):
            raise DimensionMismatchError(
                f"{self.coef.size} coefficients for a {self.basis.n_terms}-term basis")

    def __call__(self, z):
        return pce_eval(self, z)

    @property
    def mean(self) -> float:
        return float(self.coef[0])

    @property
    def variance(self) -> float:
        return float(np.sum(self.coef[1:] ** 2))

    def save(self, path) -> None:
        """Write the versioned text format (coefficients at full precision)."""
        lines = [FORMAT_TAG, f"qoi = {self.qoi}",
                 "orders = " + " ".join(map(str, self.basis.orders)),
                 f"terms = {self.basis.n_terms}"]
        for key in sorted(self.diagnostics):
            lines.append(f"{key} = {self.diagnostics[key]!r}")
        lines.append("[coefficients]")
        for alpha, c in zip(self.basis.multi_indices, self.coef):
            lines.append(" ".join(map(str, alpha)) + " " + repr(float(c)))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "PcSurrogate":
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0].strip() != FORMAT_TAG:
            raise ValueError(f"{path}: not a '{FORMAT_TAG}' file")
        meta, i = {}, 1
        while lines[i].strip() != "[coefficients]":
            key, _, value = lines[i].partition("=")
            meta[key.strip()] = value.strip()
            i += 1
        basis = PcBasis(tuple(int(k) for k in meta.pop("orders").split()))
        terms = int(meta.pop("terms"))
        qoi = meta.pop("qoi")
        rows = [ln.split() for ln in lines[i + 1:] if ln.strip()]
        if len(rows) != terms:
            raise ValueError(f"{path}: expected {terms} coefficients, found {len(rows)}")
        alpha = np.array([[int(v) for v in r[:-1]] for r in rows])
        if not np.array_equal(alpha, basis.multi_indices):
            raise ValueError(f"{path}: multi-index order does not match the basis")
        coef = np.array([float(r[-1]) for r in rows])
        diag = {key: ast.literal_eval(value) for key, value in meta.items()}
        return cls(basis, coef, qoi, diag)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"alpha{d + 1}" for d in range(self.basis.dim)] + ["coefficient"])
            for alpha, c in zip(self.basis.multi_indices, self.coef):
                w.writerow([*map(int, alpha), repr(float(c))])


def pce_eval(surrogate: PcSurrogate, z) -> np.ndarray:
    """Evaluate the expansion by successive contraction of the coefficient tensor."""
    basis = surrogate.basis
    z, single = _rows(z, basis.dim)
    C = surrogate.coef.reshape(basis.shape)
    out = np.empty(z.shape[0])
    for s in range(0, z.shape[0], _CHUNK):
        zc = z[s:s + _CHUNK]
        # contract the last dimension first: (n, k1, .., kd) -> (n, k1, .., k_{d-1})
        F = legendre_factors(zc[:, -1], basis.orders[-1])
        T = np.tensordot(F, C, axes=([1], [basis.dim - 1]))
        for d in range(basis.dim - 2, -1, -1):
            F = legendre_factors(zc[:, d], basis.orders[d])
            T = np.einsum("n...k,nk->n...", T, F)
        out[s:s + _CHUNK] = T
    return out[0] if single else out


def fit_coefficients(basis: PcBasis, z, y, qoi: str = "", weights=None) -> PcSurrogate:
    """Least-squares fit of the expansion to training pairs ``(z, y)``.

    ``weights`` (one per point) turn the fit into weighted least squares;
    see :func:`design_weights`.
    """
    z, _ = _rows(z, basis.dim)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != z.shape[0]:
        raise DimensionMismatchError("z and y differ in length")
    Psi = basis_eval(basis, z)
    if weights is None:
        sw = np.ones_like(y)
    else:
        sw = np.sqrt(np.asarray(weights, dtype=float).ravel())
        if sw.size != y.size:
            raise DimensionMismatchError("weights and y differ in length")
    coef, _, rank, sv = np.linalg.lstsq(Psi * sw[:, None], y * sw, rcond=None)
    if rank < basis.n_terms:
        raise RankDeficiencyError(
            f"design matrix rank {rank} < {basis.n_terms} terms ({y.size} training points)")
    resid = y - Psi @ coef
    ynorm = float(np.linalg.norm(y))
    diag = {
        "n_train": int(y.size),
        "residual_norm": float(np.linalg.norm(resid)),
        "relative_residual": float(np.linalg.norm(resid) / ynorm) if ynorm > 0 else 0.0,
        "condition": float(sv[0] / sv[-1]),
    }
    log.info("fit %s: %d points, condition %.3g, relative residual %.3g",
             qoi, y.size, diag["condition"], diag["relative_residual"])
    return PcSurrogate(basis, coef, qoi, diag)


DESIGNS = ("chebyshev", "uniform")


def training_inputs(model: PriorModel, n_train: int, seed: int, design: str = "chebyshev"):
    """Training design: z on the 'train' stream and the matching parameters.

    ``'chebyshev'`` maps the stream through ``z = (1 - cos(pi u)) / 2`` so the
    points follow the arcsine law, which keeps the Legendre least-squares
    problem well conditioned near the corners of the cube; pair it with
    :func:`design_weights`. ``'uniform'`` uses the stream as is.
    """
    if design not in DESIGNS:
        raise ValueError(f"unknown design {design!r}")
    z = rng.uniforms(seed, "train", int(n_train), 4)
    if design == "chebyshev":
        z = 0.5 * (1.0 - np.cos(np.pi * z))
    return z, rosenblatt_inverse(model, z)


def design_weights(z, design: str = "chebyshev") -> np.ndarray:
    """Least-squares weights: uniform density over the design density."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if design == "uniform":
        return np.ones(z.shape[0])
    if design != "chebyshev":
        raise ValueError(f"unknown design {design!r}")
    x = 2 * z - 1
    return np.prod(0.5 * np.pi * np.sqrt(np.clip(1 - x * x, 0.0, None)), axis=1)


def _default_solver(theta, qoi, resolution, tol, D):
    from .closure import forward_model
    from .geometry import PoreParams

    out = np.empty(theta.shape[0])
    for i, row in enumerate(theta):
        out[i] = getattr(forward_model(PoreParams.from_array(row), D, resolution, tol), qoi)
    return out


def pce_fit(model: PriorModel, qoi: str, n_train: int | None = None, seed: int = 0,
            orders=(4, 4, 4, 4), oversample: float = 2.0, resolution: int = 128,
            tol: float = 1e-8, D=None, solver=None, design: str = "chebyshev") -> PcSurrogate:
    """Fit a surrogate of ``qoi`` under ``model`` following the Rosenblatt route.

    Parameters
    ----------
    n_train : int, optional
        Training size; defaults to ``oversample`` times the term count.
    solver : callable, optional
        ``solver(theta) -> values`` for the requested QoI. The default runs
        :func:`~poreuq.closure.forward_model` serially (geff is analytic).
    """
    if qoi not in QOIS:
        raise ValueError(f"unknown QoI {qoi!r}")
    basis = PcBasis(orders)
    need = int(np.ceil(oversample * basis.n_terms))
    n_train = need if n_train is None else int(n_train)
    if n_train < need:
        raise ValueError(f"n_train={n_train} below oversampled minimum {need}")
    z, theta = training_inputs(model, n_train, seed, design)
    if solver is not None:
        y = np.asarray(solver(theta), dtype=float)
    elif qoi == "geff":
        from .geometry import PoreParams, geometric_effectives

        y = np.array([geometric_effectives(PoreParams.from_array(r))[1] for r in theta])
    else:
        y = _default_solver(theta, qoi, resolution, tol, D)
    ok = np.isfinite(y)
    if not ok.all():
        bad = np.flatnonzero(~ok)
        raise RuntimeError(f"forward solve failed for training sample(s) {bad.tolist()}")
    s = fit_coefficients(basis, z, y, qoi, weights=design_weights(z, design))
    s.diagnostics.update(model=model.tag, seed=int(seed), design=design)
    return s


def sobol_first_order(surrogate: PcSurrogate) -> np.ndarray:
    """First-order Sobol' indices over the Z coordinates from the coefficients."""
    alpha = surrogate.basis.multi_indices
    c2 = surrogate.coef**2
    nonconst = alpha.sum(axis=1) > 0
    total = c2[nonconst].sum()
    if total <= 0:
        raise ZeroVarianceError("surrogate has zero variance")
    S = np.empty(surrogate.basis.dim)
    for d in range(surrogate.basis.dim):
        only_d = nonconst & (np.count_nonzero(alpha, axis=1) == 1) & (alpha[:, d] > 0)
        S[d] = c2[only_d].sum() / total
    return S
