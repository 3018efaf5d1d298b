"""Acceptance suite: one test (or a small group) per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists
one pass/fail line per criterion with the measured values. The desk-scale
pipeline runs are shared through module fixtures; the whole suite takes
about 7 minutes on one core.
"""

import math
import time

import numpy as np
import pytest

from poreuq import rng
from poreuq.bayesnet import (MODELS, NARROW, PHYSICAL, PriorModel, empirical_correlation,
                             rosenblatt_forward, rosenblatt_inverse, sample_parameters)
from poreuq.cache import SolveCache
from poreuq.closure import effective_tensor, forward_model, solve_closure
from poreuq.config import RunConfig
from poreuq.density import kde_1d, kde_2d, select_bandwidth
from poreuq.geometry import PoreMask, PoreParams
from poreuq.gsa import mutual_information
from poreuq.pipeline import run_pipeline, run_stage, solve_batch
from poreuq.stats import cramer_test
from poreuq.surrogate import (PcBasis, PcSurrogate, design_weights, fit_coefficients,
                              legendre_factors, pce_eval, sobol_first_order, training_inputs)

QOIS = ("DL", "DT", "geff")
criterion = pytest.mark.criterion


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def tops(store):
    rows = store.read_csv("mi.csv")
    return {q: max((r for r in rows if r["qoi"] == q), key=lambda r: float(r["r_hat"]))["param"]
            for q in QOIS}


# ---------------------------------------------------------------- shared runs

@pytest.fixture(scope="module")
def narrow(tmp_path_factory):
    """Desk-scale P1-narrow pipeline (resolution 64, 1250 training solves)."""
    cfg = RunConfig(out=str(tmp_path_factory.mktemp("narrow")))
    t0 = time.perf_counter()
    run_stage(cfg, "fit")
    t_fit = time.perf_counter() - t0
    store = run_pipeline(cfg)
    return store, t_fit, time.perf_counter() - t0


@pytest.fixture(scope="module")
def narrow_again(tmp_path_factory):
    """Same config and seed, two workers, fresh output and cache."""
    return run_pipeline(RunConfig(out=str(tmp_path_factory.mktemp("narrow2")), jobs=2))


@pytest.fixture(scope="module")
def physical(tmp_path_factory):
    cfg = RunConfig(out=str(tmp_path_factory.mktemp("physical")), preset="physical",
                    compare__enabled=False)
    t0 = time.perf_counter()
    store = run_pipeline(cfg)
    return store, time.perf_counter() - t0


# ---------------------------------------------------------------- 1-3 priors

@criterion(1, "Rosenblatt round trip")
def test_rosenblatt_round_trip(record_property):
    t0 = time.perf_counter()
    z = rng.uniforms(0, "acceptance/rosenblatt", 100_000, 4)
    worst = {}
    for m in MODELS:
        model = PriorModel(m, PHYSICAL)
        back = rosenblatt_forward(model, rosenblatt_inverse(model, z))
        worst[m] = float(np.max(np.abs(back - z)))
    dt = time.perf_counter() - t0
    record_property("detail",
                    ", ".join(f"{m} {v:.1e}" for m, v in worst.items()) + f", {dt:.1f} s")
    assert max(worst.values()) < 1e-12
    assert dt < 10


@criterion(2, "constraint satisfaction")
def test_constraints(record_property):
    t0 = time.perf_counter()
    bad = {}
    for m in ("p1", "p2"):
        R, th, d, l = sample_parameters(PriorModel(m, PHYSICAL), 1_000_000, seed=0).theta.T
        v = (d >= 2 * R * np.cos(th)) | (l <= 2 * R - np.sqrt(4 * R * R - d * d))
        if m == "p2":
            short = l < 2 * R
            v[short] |= d[short] >= np.sqrt(4 * l[short] * R[short] - l[short] ** 2)
        bad[m] = int(np.count_nonzero(v))
    dt = time.perf_counter() - t0
    record_property("detail", f"violations {bad}, {dt:.1f} s")
    assert bad == {"p1": 0, "p2": 0}
    assert dt < 30


@criterion(3, "correlation regimes")
def test_correlations(record_property):
    t0 = time.perf_counter()
    off = ~np.eye(4, dtype=bool)
    p1n = empirical_correlation(sample_parameters(PriorModel("p1", NARROW), 100_000, 0))
    p0n = empirical_correlation(sample_parameters(PriorModel("p0", NARROW), 100_000, 0))
    p1p = empirical_correlation(sample_parameters(PriorModel("p1", PHYSICAL), 100_000, 0))
    dt = time.perf_counter() - t0
    record_property("detail", f"max|rho| narrow {np.abs(p1n[off]).max():.3f}, "
                    f"rho(R,d) physical {p1p[0, 2]:.3f}, "
                    f"P0-P1 {np.abs(p1n - p0n)[off].max():.3f}, {dt:.1f} s")
    assert np.abs(p1n[off]).max() < 0.05
    assert p1p[0, 2] > 0.1
    assert np.abs(p1n - p0n)[off].max() < 0.03
    assert dt < 10


# ---------------------------------------------------------------- 4-5 closure

@criterion(4, "closure oracles")
def test_closure_oracles(record_property):
    t0 = time.perf_counter()
    full = PoreMask(np.ones((32, 32), bool), (-1.0, 1.0, 0.0, 2.0))
    DL1, DT1 = effective_tensor(solve_closure(full), full)
    f = np.zeros((256, 256), bool)
    f[:, 64:192] = True
    out = []
    for fluid in (f, f.T.copy()):
        m = PoreMask(fluid, (0.0, 1.0, 0.0, 1.0))
        out.append(effective_tensor(solve_closure(m), m))
    dt = time.perf_counter() - t0
    (hL, hT), (vL, vT) = out
    record_property("detail", f"full ({DL1:.8f}, {DT1:.8f}), horizontal ({hL:.4f}, {hT:.1e}), "
                    f"vertical ({vL:.1e}, {vT:.4f}), {dt:.1f} s")
    assert abs(DL1 - 1) < 1e-6 and abs(DT1 - 1) < 1e-6
    assert abs(hL - 0.5) < 0.01 and abs(hT) < 0.01
    assert abs(vT - 0.5) < 0.01 and abs(vL) < 0.01
    assert dt < 120


@criterion(5, "grid convergence")
def test_grid_convergence(record_property):
    t0 = time.perf_counter()
    sets = sample_parameters(PriorModel("p1", PHYSICAL), 5, seed=0).theta
    ok, parts = [], []
    for t in sets:
        p = PoreParams.from_array(t)
        dl = [forward_model(p, resolution=r).DL for r in (64, 128, 256)]
        ok.append(abs(dl[1] - dl[2]) < abs(dl[0] - dl[1]))
        parts.append(f"{abs(dl[0] - dl[1]):.1e}>{abs(dl[1] - dl[2]):.1e}")
    dt = time.perf_counter() - t0
    record_property("detail", ", ".join(parts) + f", {dt:.0f} s")
    assert all(ok)
    assert dt < 600


# ---------------------------------------------------------------- 6-9 surrogate, KDE, MI

@criterion(6, "surrogate exactness")
def test_in_span_recovery(record_property):
    basis = PcBasis()
    z, _ = training_inputs(PriorModel("p1", NARROW), 1250, 0)
    coef = rng.uniforms(0, "acceptance/span", basis.n_terms, 1)[:, 0] - 0.5
    y = pce_eval(PcSurrogate(basis, coef), z)
    s = fit_coefficients(basis, z, y, weights=design_weights(z))
    rel = np.linalg.norm(s.coef - coef) / np.linalg.norm(coef)
    res = np.linalg.norm(pce_eval(s, z) - y) / np.linalg.norm(y)
    record_property("detail", f"in-span coefficient error {rel:.1e}, residual {res:.1e}")
    assert rel < 1e-8 and res < 1e-8


@criterion(6, "surrogate exactness")
def test_heldout_error(narrow, record_property):
    store, t_fit, _ = narrow
    t0 = time.perf_counter()
    model = PriorModel("p1", NARROW)
    z = rng.uniforms(0, "acceptance/heldout", 100, 4)
    Y, failures = solve_batch(rosenblatt_inverse(model, z), store.config)
    assert not failures
    sur = store.surrogates()
    rel = {q: float(np.sqrt(np.mean((pce_eval(sur[q], z) - Y[:, k]) ** 2))
                    / np.sqrt(np.mean(Y[:, k] ** 2)))
           for k, q in enumerate(QOIS)}
    dt = t_fit + time.perf_counter() - t0
    errors = ", ".join(f"{q} {v:.2%}" for q, v in rel.items())
    record_property("detail", f"held-out relRMS {errors}, {dt / 60:.1f} min")
    assert rel["DL"] < 0.10
    assert dt < 20 * 60


@criterion(7, "Sobol additive oracle")
def test_sobol_additive(record_property):
    z, _ = training_inputs(PriorModel("p1", NARROW), 1250, 0)

    def psi1(u):
        return legendre_factors(u, 1)[:, 1]

    s = fit_coefficients(PcBasis(), z, psi1(z[:, 0]) + psi1(z[:, 1]), weights=design_weights(z))
    S = sobol_first_order(s)
    record_property("detail", "S1.." + ", ".join(f"{v:.4f}" for v in S))
    assert abs(S[0] - 0.5) <= 0.01 and abs(S[1] - 0.5) <= 0.01
    assert S[2] < 0.01 and S[3] < 0.01


@criterion(8, "KDE point values and integrals")
def test_kde(record_property):
    g = np.linspace(-3, 3, 7)
    p1 = kde_1d([0.0], 1.0, grid=g).values[3]
    p2 = kde_2d([0.0], [0.0], 1.0, 1.0, grid=(g, g)).values[3, 3]
    gen = rng.generator(0, "acceptance/kde")
    x = gen.normal(size=100_000)
    y = 0.6 * x + 0.8 * gen.normal(size=100_000)
    hx, hy = select_bandwidth(x)[0], select_bandwidth(y)[0]
    i1 = kde_1d(x, hx).integral()
    i2 = kde_2d(x, y, hx, hy).integral()
    record_property("detail", f"peaks {p1:.6f} {p2:.6f}, integrals {i1:.4f} {i2:.4f}")
    assert abs(p1 - 0.39894) < 1e-5 and abs(p1 - 1 / math.sqrt(2 * math.pi)) < 1e-6
    assert abs(p2 - 0.15915) < 1e-5 and abs(p2 - 1 / (2 * math.pi)) < 1e-6
    assert 0.97 <= i1 <= 1.01 and 0.95 <= i2 <= 1.02


@criterion(9, "MI estimator oracle")
def test_mi_oracle(record_property):
    t0 = time.perf_counter()
    gen = rng.generator(0, "acceptance/mi")
    x = gen.normal(size=1_000_000)
    y = 0.5 * x + math.sqrt(0.75) * gen.normal(size=1_000_000)
    S, se, _, _ = mutual_information(x, y, m_mc=10_000, seed=0, grid_size=128)
    u = gen.normal(size=1_000_000)
    v = gen.gamma(2.0, size=1_000_000)
    S0, se0, _, _ = mutual_information(u, v, m_mc=10_000, seed=0, grid_size=128)
    dt = time.perf_counter() - t0
    record_property("detail", f"S {S:.5f} (target 0.14384, {S / 0.14384 - 1:+.1%}), "
                    f"independent {S0:.1e} / se {se0:.1e}, {dt:.0f} s")
    assert abs(S - 0.14384) <= 0.05 * 0.14384
    assert abs(S0) < 3 * se0
    assert dt < 300


# ---------------------------------------------------------------- 10-13 pipeline

@criterion(10, "ranking reproduction")
def test_ranking_narrow(narrow, record_property):
    store, _, total = narrow
    t = tops(store)
    record_property("detail", f"narrow tops {t}, {total / 60:.1f} min")
    assert total < 45 * 60
    assert t == {"DL": "theta", "DT": "theta", "geff": "R"}


@criterion(10, "ranking reproduction")
def test_ranking_physical(physical, record_property):
    store, total = physical
    t = tops(store)
    record_property("detail", f"physical tops {t}, {total / 60:.1f} min")
    assert total < 45 * 60
    assert t == {"DL": "theta", "DT": "d", "geff": "R"}


@criterion(11, "MC convergence trace")
@pytest.mark.parametrize("run", ["narrow", "physical"])
def test_trace(run, request, record_property):
    store = request.getfixturevalue(run)[0]
    se = {(r["param"], r["qoi"]): (float(r["std_error"]), int(r["m_mc"]))
          for r in store.read_csv("mi.csv")}
    trace = {(r["param"], r["qoi"], int(r["m"])): float(r["running_mean"])
             for r in store.read_csv("trace.csv")}
    worst = 0.0
    for (p, q), (s, M) in se.items():
        worst = max(worst, abs(trace[p, q, M] - trace[p, q, M // 2]) / s)
    record_property("detail", f"{run} max |S(M) - S(M/2)| = {worst:.2f} se")
    assert len(se) == 12
    assert worst < 2


@criterion(12, "Cramér test")
def test_cramer_null_level(record_property):
    t0 = time.perf_counter()
    rejects = 0
    for k in range(100):
        gen = rng.generator(k, "acceptance/cramer-null")
        rejects += cramer_test(gen.normal(size=2000), gen.normal(size=2000), 0.95, 1000,
                               seed=k).reject
    dt = time.perf_counter() - t0
    record_property("detail", f"level {rejects / 100:.2f}, {dt:.0f} s")
    assert 0.01 <= rejects / 100 <= 0.10


@criterion(12, "Cramér test")
def test_cramer_shift(record_property):
    gen = rng.generator(0, "acceptance/cramer-shift")
    r = cramer_test(gen.normal(size=2000), 1.0 + gen.normal(size=2000), 0.95, 1000, seed=0)
    record_property("detail", f"1-sigma shift p {r.p_value:.1e}")
    assert r.p_value < 0.001 and r.reject


@criterion(12, "Cramér test")
def test_cramer_narrow_vs_physical(narrow, record_property):
    rows = {r["variable"]: r for r in narrow[0].read_csv("cramer.csv")}
    record_property("detail", "narrow vs physical: " + ", ".join(
        f"{k} {r['decision']}" for k, r in rows.items()))
    assert rows["DL"]["decision"] == "reject"


@criterion(13, "determinism")
def test_determinism(narrow, narrow_again, record_property):
    a, b = narrow[0], narrow_again
    same = {f: read(a.path(f)) == read(b.path(f)) for f in ("mi.csv", "corr.csv", "cramer.csv")}
    record_property("detail", f"jobs 1 vs 2 byte-identical: {same}")
    assert all(same.values())
    assert len(SolveCache(b.cache_dir)) > 0
