"""Mutual-information sensitivity indices with plug-in kernel density estimates.

For an input ``Theta`` and an output ``g`` the index is

    S = E_{f_Theta x f_g}[ rho log rho ],   rho = f_{g,Theta} / (f_g f_Theta),

which equals the mutual information. Densities come from gridded KDEs (or
the exact uniform marginal for root parameters) and the expectation is an
average over evaluation points drawn from the product of the marginals.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import rng
from .bayesnet import PARAMS, PriorModel, marginal_density, rosenblatt_inverse
from .density import DEFAULT_GRID, kde_1d, kde_2d, make_axis, select_bandwidth
from .errors import ConvergenceWarning, DimensionMismatchError, ZeroVarianceError
from .surrogate import PcSurrogate, pce_eval

log = logging.getLogger(__name__)

EVALUATIONS = ("product", "joint")
DESIGNS = ("rqmc", "mc")

__all__ = [
    "MiEstimate",
    "RankingTable",
    "mutual_information",
    "gsa_samples",
    "mi_index",
    "rank_effects",
    "write_mi_csv",
    "write_trace_csv",
]


@dataclass
class MiEstimate:
    """Monte Carlo estimate of one mutual-information index (nats)."""

    param: str
    qoi: str
    S_hat: float
    std_error: float
    m_mc: int
    trace: np.ndarray = field(repr=False)
    n_kde: int = 0
    seed: int = 0
    info: dict = field(default_factory=dict, repr=False)

    @property
    def M(self) -> int:
        return self.m_mc


@dataclass
class RankingTable:
    """Normalized effects for one QoI (rows sum to one)."""

    qoi: str
    params: tuple
    r_hat: np.ndarray
    err_low: np.ndarray
    err_high: np.ndarray
    S_hat: np.ndarray
    std_error: np.ndarray

    def as_dict(self) -> dict:
        return {p: float(r) for p, r in zip(self.params, self.r_hat)}

    def top(self) -> str:
        return self.params[int(np.argmax(self.r_hat))]


def _evaluation_points(x, y, m, seed, stream, evaluation, design):
    n = x.size
    if evaluation == "joint":
        if m > n:
            raise ValueError("m_mc exceeds the number of joint samples")
        return x[:m], y[:m]
    if design == "mc":
        ix = rng.integers(seed, stream + "/x", m, n)
        iy = rng.integers(seed, stream + "/y", m, n)
        return x[ix], y[iy]
    # scrambled Halton points pushed through the empirical quantiles: each point
    # is distributed as the product measure, the pairs are stratified jointly
    u = qmc.Halton(2, scramble=True, seed=rng.generator(seed, stream)).random(m)
    idx = np.minimum((u * n).astype(np.int64), n - 1)
    return np.sort(x)[idx[:, 0]], np.sort(y)[idx[:, 1]]


def mutual_information(x, y, m_mc: int = 10_000, seed: int = 0, stream: str = "mi",
                       grid_size: int = DEFAULT_GRID, fx=None, evaluation: str = "product",
                       design: str = "rqmc", bandwidths=None, warn: bool = True):
    """Plug-in MI estimate from paired samples.

    Parameters
    ----------
    x, y : array_like
        Paired samples (``x`` is the input, ``y`` the output).
    fx : callable, optional
        Exact marginal density of ``x``; a KDE is used when omitted.
    evaluation : {'product', 'joint'}
        Draw evaluation points from the product of the marginals, or reuse
        the first ``m_mc`` joint pairs and average ``log rho``.
    design : {'rqmc', 'mc'}
        Product-measure design: scrambled Halton or iid index resampling.
    bandwidths : (hx, hy), optional
        Override the improved Sheather-Jones bandwidths.

    Returns
    -------
    S, se, trace, info
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DimensionMismatchError("x and y must have the same length")
    if evaluation not in EVALUATIONS:
        raise ValueError(f"unknown evaluation {evaluation!r}")
    if design not in DESIGNS:
        raise ValueError(f"unknown design {design!r}")
    m_mc = int(m_mc)
    if m_mc < 2:
        raise ValueError("m_mc must be at least 2")
    if bandwidths is None:
        hx, fbx = select_bandwidth(x)
        hy, fby = select_bandwidth(y)
    else:
        (hx, hy), fbx, fby = bandwidths, False, False
    ax, ay = make_axis(x, hx, grid_size), make_axis(y, hy, grid_size)
    joint = kde_2d(x, y, hx, hy, grid=(ax, ay))
    fy = kde_1d(y, hy, grid=ay)
    if fx is None:
        fx = kde_1d(x, hx, grid=ax)

    xe, ye = _evaluation_points(x, y, m_mc, seed, stream, evaluation, design)
    fj = joint(xe, ye)
    den = fx(xe) * fy(ye)
    ok = (fj > 0) & (den > 0)
    rho = np.where(ok, fj / np.where(ok, den, 1.0), 1.0)
    if evaluation == "joint":
        X = np.where(ok, np.log(rho), 0.0)
    else:
        X = np.where(ok, rho * np.log(rho), 0.0)
    S = float(X.mean())
    se = float(X.std(ddof=1) / np.sqrt(m_mc))
    trace = np.cumsum(X) / np.arange(1, m_mc + 1)
    trace[-1] = S
    tail = trace[int(0.9 * m_mc):]
    drift = float(np.max(np.abs(tail - S))) if tail.size else 0.0
    info = {"h": (hx, hy), "fallback": (fbx, fby), "out_of_grid": float(np.mean(~ok)),
            "drift": drift, "evaluation": evaluation, "design": design}
    if warn and drift > 2 * se:
        warnings.warn(f"MI running mean drifts by {drift:.3g} > 2 std-errors ({2 * se:.3g}) "
                      "over the last decile", ConvergenceWarning, stacklevel=2)
    log.debug("MI %s: S=%.5g se=%.3g out-of-grid %.2g", stream, S, se, info["out_of_grid"])
    return S, se, trace, info


def gsa_samples(surrogate: PcSurrogate | dict, model: PriorModel, n_kde: int, seed: int):
    """Joint samples ``(theta, g)`` used to build the KDEs.

    ``surrogate`` may be a single surrogate or a mapping ``qoi -> surrogate``;
    the parameter samples are shared.
    """
    z = rng.uniforms(seed, "gsa", int(n_kde), 4)
    theta = rosenblatt_inverse(model, z)
    if isinstance(surrogate, dict):
        return theta, {k: pce_eval(s, z) for k, s in surrogate.items()}
    return theta, pce_eval(surrogate, z)


def mi_index(surrogate: PcSurrogate, model: PriorModel, param: str, n_kde: int = 1_000_000,
             m_mc: int = 10_000, seed: int = 0, grid_size: int = DEFAULT_GRID,
             marginal: str = "auto", evaluation: str = "product", design: str = "rqmc",
             samples=None, qoi: str | None = None) -> MiEstimate:
    """Mutual-information index of ``param`` for the surrogate output.

    Parameters
    ----------
    marginal : {'auto', 'uniform', 'kde'}
        Density of the input in the denominator: exact uniform for root
        parameters and KDE otherwise ('auto'), or forced either way.
    samples : (theta, g), optional
        Precomputed output of :func:`gsa_samples` to share across calls.
    """
    if param not in PARAMS:
        raise ValueError(f"unknown parameter {param!r}")
    qoi = qoi or surrogate.qoi
    theta, g = samples if samples is not None else gsa_samples(surrogate, model, n_kde, seed)
    x = theta[:, PARAMS.index(param)]
    mode = marginal
    if mode == "auto":
        mode = "uniform" if param in model.roots else "kde"
    if mode == "uniform":
        def fx(v):
            return marginal_density(model, param, v, mode="uniform")
    else:
        fx = None
    S, se, trace, info = mutual_information(
        x, g, m_mc=m_mc, seed=seed, stream=f"mi/{param}/{qoi}", grid_size=grid_size, fx=fx,
        evaluation=evaluation, design=design)
    info["marginal"] = mode
    return MiEstimate(param, qoi, S, se, int(m_mc), trace, int(theta.shape[0]), int(seed), info)


def rank_effects(estimates) -> RankingTable:
    """Normalize indices of one QoI into relative effects.

    Negative estimates (estimator noise) are floored at zero. Error bars
    are the change in ``r`` when one index moves by two standard errors.
    """
    estimates = list(estimates)
    if len(estimates) < 2:
        raise ValueError("need at least two estimates")
    qois = {e.qoi for e in estimates}
    if len(qois) != 1:
        raise ValueError(f"estimates mix QoIs: {sorted(qois)}")
    S = np.array([max(e.S_hat, 0.0) for e in estimates])
    se = np.array([e.std_error for e in estimates])
    total = S.sum()
    if total <= 0:
        raise ZeroVarianceError("all sensitivity indices are zero")
    r = S / total
    up = S + 2 * se
    dn = np.maximum(S - 2 * se, 0.0)
    rest = total - S
    r_hi = up / (rest + up)
    with np.errstate(invalid="ignore", divide="ignore"):
        r_lo = np.where(rest + dn > 0, dn / (rest + dn), 0.0)
    return RankingTable(qois.pop(), tuple(e.param for e in estimates), r,
                        r - r_lo, r_hi - r, np.array([e.S_hat for e in estimates]), se)


def write_mi_csv(path, estimates, rankings: dict) -> None:
    """mi.csv: one row per (param, qoi) with the normalized effect and error bars."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "qoi", "S_hat", "std_error", "r_hat", "r_err_low", "r_err_high",
                    "n_kde", "m_mc", "seed"])
        for e in estimates:
            t = rankings[e.qoi]
            k = t.params.index(e.param)
            w.writerow([e.param, e.qoi, repr(e.S_hat), repr(e.std_error), repr(float(t.r_hat[k])),
                        repr(float(t.err_low[k])), repr(float(t.err_high[k])), e.n_kde, e.m_mc,
                        e.seed])


def write_trace_csv(path, estimates, points: int = 200) -> None:
    """trace.csv: running means on a log-spaced subset plus ``M/2`` and ``M``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "qoi", "m", "running_mean"])
        for e in estimates:
            m = np.union1d(np.geomspace(1, e.m_mc, points).astype(np.int64),
                           [max(1, e.m_mc // 2), e.m_mc])
            for k in m:
                w.writerow([e.param, e.qoi, int(k), repr(float(e.trace[k - 1]))])
