"""End-to-end orchestration: sample, solve, fit, densities, sensitivity, comparison.

Each stage writes its artifacts under the output directory and later stages
read only those files, so any stage can be rerun on its own. Layout::

    manifest.json     config echo, versions, artifact hashes
    samples.csv       prior samples (index, z1..z4, R, theta, d, l, valid)
    corr.csv          empirical correlation of the samples
    training.csv      training design and forward-solve results
    failures.csv      forward solves that raised, with their indices
    surrogates/       <qoi>.pce (versioned text) and <qoi>.csv, sobol.csv
    densities/        gridded KDEs of each QoI and QoI pair
    mi.csv, trace.csv mutual-information indices and running means
    reference/        training.csv and surrogates/ of the comparison model
    cramer.csv        two-sample tests against the comparison model
    cache/            forward-solve cache (default location)
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, rng
from ._kernels import BACKEND
from .bayesnet import PARAMS, PriorModel, empirical_correlation, sample_parameters
from .cache import SolveCache, solve_key
from .closure import DiffusivityField, forward_model
from .config import RunConfig
from .density import kde_1d, kde_2d, select_bandwidth
from .errors import PipelineError
from .geometry import PoreParams
from .gsa import gsa_samples, mi_index, rank_effects, write_mi_csv, write_trace_csv
from .stats import cramer_test, write_cramer_csv
from .surrogate import (QOIS, PcBasis, PcSurrogate, design_weights, fit_coefficients,
                        pce_eval, sobol_first_order, training_inputs)

log = logging.getLogger(__name__)

STAGES = ("sample", "solve", "fit", "density", "gsa", "compare")
PAIRS = (("DL", "DT"), ("DT", "geff"), ("geff", "DL"))
FAILURE_LIMIT = 0.01

__all__ = ["STAGES", "ResultsStore", "run_pipeline", "run_stage", "solve_batch", "cache_key"]


def cache_key(params: PoreParams, resolution: int, tol: float, ratio: float = 1.0,
              bc: str = "mixed") -> str:
    """Content key of one forward solve."""
    return solve_key(params.as_array(), resolution, tol, ratio, bc)


@dataclass
class ResultsStore:
    """Output directory of a run plus the counters of the current process."""

    root: str
    config: RunConfig
    stats: dict = field(default_factory=lambda: {"solves": 0, "cache_hits": 0, "failures": 0})

    def __post_init__(self):
        self.root = os.fspath(self.root)
        os.makedirs(self.root, exist_ok=True)

    def path(self, *parts) -> str:
        return os.path.join(self.root, *parts)

    def exists(self, *parts) -> bool:
        return os.path.exists(self.path(*parts))

    @property
    def cache_dir(self) -> str:
        return self.config["cache.dir"] or self.path("cache")

    def surrogates(self, prefix: str = "") -> dict:
        d = self.path(prefix, "surrogates")
        return {q: PcSurrogate.load(os.path.join(d, f"{q}.pce")) for q in QOIS}

    def read_csv(self, *parts) -> list[dict]:
        with open(self.path(*parts), newline="") as fh:
            return list(csv.DictReader(fh))

    def write_manifest(self, stages) -> dict:
        artifacts = {}
        for dirpath, dirnames, filenames in os.walk(self.root):
            dirnames[:] = sorted(d for d in dirnames
                                 if os.path.join(dirpath, d) != os.path.normpath(self.cache_dir))
            for name in sorted(filenames):
                full = os.path.join(dirpath, name)
                rel = os.path.relpath(full, self.root)
                if rel == "manifest.json":
                    continue
                with open(full, "rb") as fh:
                    artifacts[rel] = hashlib.sha256(fh.read()).hexdigest()
        manifest = {
            "package": "poreuq",
            "version": __version__,
            "backend": BACKEND,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": _scipy_version(),
            "seed": self.config["seed"],
            "config": self.config.as_dict(),
            "stages": list(stages),
            "stats": dict(self.stats),
            "artifacts": artifacts,
        }
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest


def _scipy_version():
    import scipy

    return scipy.__version__


def _model(config: RunConfig, reference: bool = False) -> PriorModel:
    if reference:
        return PriorModel(config["compare.model"], config.replace(
            preset=config["compare.preset"], **{f"ranges.{p}": None for p in PARAMS}).ranges)
    return PriorModel(config["model"], config.ranges)


# ---------------------------------------------------------------- forward solves

def _solve_one(task):
    row, resolution, tol, ratio, bc = task
    try:
        props = forward_model(PoreParams.from_array(row), DiffusivityField(1.0, ratio),
                              resolution=resolution, tol=tol, bc=bc)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        return {"error": type(exc).__name__, "message": str(exc)}
    return props.as_dict()


def solve_batch(theta, config: RunConfig, cache: SolveCache | None = None, jobs: int | None = None):
    """Forward solves for the rows of ``theta`` through the cache and a process pool.

    Returns
    -------
    Y : ndarray, shape (n, 4)
        DL, DT, geff and porosity; NaN rows for failed solves.
    failures : list of (index, error, message)
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    settings = (config["solver.resolution"], config["solver.tol"],
                config["solver.diffusivity_ratio"], config["solver.bc"])
    keys = [solve_key(r, *settings) for r in theta]
    results = [cache.get(k) if cache is not None else None for k in keys]
    todo = [i for i, r in enumerate(results) if r is None]
    tasks = [(theta[i], *settings) for i in todo]
    jobs = config["jobs"] if jobs is None else int(jobs)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            fresh = list(ex.map(_solve_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        fresh = [_solve_one(t) for t in tasks]
    for i, res in zip(todo, fresh):
        results[i] = res
        if cache is not None and "error" not in res:
            cache.put(keys[i], res)
    Y = np.full((theta.shape[0], 4), np.nan)
    failures = []
    for i, res in enumerate(results):
        if "error" in res:
            failures.append((i, res["error"], res["message"]))
        else:
            Y[i] = [res["DL"], res["DT"], res["geff"], res["porosity"]]
    log.info("%d forward solves: %d cached, %d computed, %d failed", len(keys),
             len(keys) - len(todo), len(todo), len(failures))
    return Y, failures


# ---------------------------------------------------------------- stages

def _write_rows(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _f(x) -> str:
    return repr(float(x))


def stage_sample(store: ResultsStore) -> None:
    cfg = store.config
    batch = sample_parameters(_model(cfg), cfg["sample.n"], cfg["seed"])
    batch.to_csv(store.path("samples.csv"))
    C = empirical_correlation(batch)
    _write_rows(store.path("corr.csv"), ["param", *PARAMS],
                [[p, *map(_f, C[i])] for i, p in enumerate(PARAMS)])


def _n_train(cfg: RunConfig) -> int:
    need = int(np.ceil(cfg["surrogate.oversample"] * PcBasis(cfg["surrogate.orders"]).n_terms))
    n = cfg["surrogate.n_train"] or need
    if n < need:
        raise ValueError(f"surrogate.n_train={n} below the oversampled minimum {need}")
    return int(n)


def stage_solve(store: ResultsStore, prefix: str = "") -> None:
    cfg = store.config
    model = _model(cfg, reference=bool(prefix))
    n = _n_train(cfg)
    z, theta = training_inputs(model, n, cfg["seed"], cfg["surrogate.design"])
    cache = SolveCache(store.cache_dir)
    Y, failures = solve_batch(theta, cfg, cache)
    store.stats["solves"] += n - cache.hits
    store.stats["cache_hits"] += cache.hits
    store.stats["failures"] += len(failures)
    failed = {i for i, _, _ in failures}
    _write_rows(store.path(prefix, "training.csv"),
                ["index", "z1", "z2", "z3", "z4", *PARAMS, "DL", "DT", "geff", "porosity",
                 "status"],
                [[i, *map(_f, z[i]), *map(_f, theta[i]), *map(_f, Y[i]),
                  "failed" if i in failed else "ok"] for i in range(n)])
    _write_rows(store.path(prefix, "failures.csv"), ["index", *PARAMS, "error", "message"],
                [[i, *map(_f, theta[i]), err, msg] for i, err, msg in failures])
    if len(failures) > FAILURE_LIMIT * n:
        raise PipelineError(f"{len(failures)} of {n} forward solves failed "
                            f"(limit {FAILURE_LIMIT:.0%}); see failures.csv")


def stage_fit(store: ResultsStore, prefix: str = "") -> None:
    cfg = store.config
    rows = [r for r in store.read_csv(prefix, "training.csv") if r["status"] == "ok"]
    z = np.array([[float(r[f"z{k}"]) for k in range(1, 5)] for r in rows])
    w = design_weights(z, cfg["surrogate.design"])
    basis = PcBasis(cfg["surrogate.orders"])
    model = _model(cfg, reference=bool(prefix))
    out = store.path(prefix, "surrogates")
    os.makedirs(out, exist_ok=True)
    sobol = []
    for q in QOIS:
        y = np.array([float(r[q]) for r in rows])
        s = fit_coefficients(basis, z, y, q, weights=w)
        s.diagnostics.update(model=model.tag, seed=cfg["seed"], design=cfg["surrogate.design"])
        s.save(os.path.join(out, f"{q}.pce"))
        s.to_csv(os.path.join(out, f"{q}.csv"))
        S1 = sobol_first_order(s)
        sobol += [[q, PARAMS[model.order[d]], _f(S1[d])] for d in range(4)]
    _write_rows(os.path.join(out, "sobol.csv"), ["qoi", "param", "S1"], sobol)


def _qoi_samples(surrogates, seed, stream, n):
    z = rng.uniforms(seed, stream, n, 4)
    return {q: pce_eval(s, z) for q, s in surrogates.items()}


def stage_density(store: ResultsStore) -> None:
    cfg = store.config
    g = _qoi_samples(store.surrogates(), cfg["seed"], "density", cfg["density.n_samples"])
    out = store.path("densities")
    os.makedirs(out, exist_ok=True)
    h = {q: select_bandwidth(g[q])[0] for q in QOIS}
    for q in QOIS:
        kde_1d(g[q], h[q], grid_size=cfg["kde.grid_size"]).to_csv(os.path.join(out, f"{q}.csv"))
    for a, b in PAIRS:
        kde_2d(g[a], g[b], h[a], h[b], grid_size=cfg["kde.grid_size"]).to_csv(
            os.path.join(out, f"{a}_{b}.csv"))


def stage_gsa(store: ResultsStore) -> None:
    cfg = store.config
    model = _model(cfg)
    surrogates = store.surrogates()
    theta, g = gsa_samples(surrogates, model, cfg["gsa.n_kde"], cfg["seed"])
    estimates, rankings = [], {}
    for q in QOIS:
        est = [mi_index(surrogates[q], model, p, m_mc=cfg["gsa.m_mc"], seed=cfg["seed"],
                        grid_size=cfg["kde.grid_size"], marginal=cfg["gsa.marginal"],
                        evaluation=cfg["gsa.evaluation"], design=cfg["gsa.design"],
                        samples=(theta, g[q]), qoi=q)
               for p in PARAMS]
        rankings[q] = rank_effects(est)
        estimates += est
        log.info("ranking %s: %s", q, rankings[q].as_dict())
    write_mi_csv(store.path("mi.csv"), estimates, rankings)
    write_trace_csv(store.path("trace.csv"), estimates)


def stage_compare(store: ResultsStore) -> None:
    cfg = store.config
    # the reference fit is redone every time so it always matches the config;
    # its forward solves come from the cache after the first run
    stage_solve(store, "reference")
    stage_fit(store, "reference")
    n, seed = cfg["cramer.n"], cfg["seed"]
    a = _qoi_samples(store.surrogates(), seed, "compare/main", n)
    b = _qoi_samples(store.surrogates("reference"), seed, "compare/reference", n)
    results = {}
    for q in QOIS:
        results[q] = cramer_test(a[q], b[q], cfg["cramer.confidence"], cfg["cramer.B"], seed,
                                 stream=f"cramer/{q}")
    for p, r in PAIRS:
        name = f"({p},{r})"
        results[name] = cramer_test(np.column_stack([a[p], a[r]]), np.column_stack([b[p], b[r]]),
                                    cfg["cramer.confidence"], cfg["cramer.B"], seed,
                                    stream=f"cramer/{name}")
    write_cramer_csv(store.path("cramer.csv"), results)


_RUNNERS = {"sample": stage_sample, "solve": stage_solve, "fit": stage_fit,
            "density": stage_density, "gsa": stage_gsa, "compare": stage_compare}
_NEEDS = {"fit": ("training.csv",), "density": ("surrogates", "geff.pce"),
          "gsa": ("surrogates", "geff.pce"), "compare": ("surrogates", "geff.pce")}


def run_stage(config: RunConfig, stage: str, store: ResultsStore | None = None) -> ResultsStore:
    """Run one stage, first producing any missing upstream artifacts."""
    if stage not in _RUNNERS:
        raise ValueError(f"unknown stage {stage!r}")
    store = store or ResultsStore(config["out"], config)
    done = []
    need = _NEEDS.get(stage)
    if need and not store.exists(*need):
        upstream = "solve" if stage == "fit" else "fit"
        run_stage(config, upstream, store)
        done.append(upstream)
    log.info("stage %s", stage)
    _RUNNERS[stage](store)
    store.write_manifest(done + [stage])
    return store


def run_pipeline(config: RunConfig) -> ResultsStore:
    """Run every stage in order (compare only when ``compare.enabled``)."""
    store = ResultsStore(config["out"], config)
    stages = [s for s in STAGES if s != "compare" or config["compare.enabled"]]
    for stage in stages:
        log.info("stage %s", stage)
        _RUNNERS[stage](store)
    store.write_manifest(stages)
    return store
