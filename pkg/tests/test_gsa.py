import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poreuq.bayesnet import NARROW, PARAMS, PriorModel
from poreuq.errors import ConvergenceWarning, DimensionMismatchError, ZeroVarianceError
from poreuq.gsa import (MiEstimate, gsa_samples, mi_index, mutual_information, rank_effects,
                        write_mi_csv, write_trace_csv)
from poreuq.surrogate import PcBasis, PcSurrogate

# reference mutual-information indices and normalized rankings for both range blocks
TABLE = {
    "narrow": {
        "S": {"DL": (0.0419, 0.5074, 0.0150, 0.0143), "DT": (0.0424, 0.2049, 0.0878, 0.0249),
              "geff": (0.8955, 0.0366, 0.0271, 0.0932)},
        "r": {"DL": (0.0724, 0.8770, 0.0259, 0.0247), "DT": (0.1177, 0.5692, 0.2438, 0.0692),
              "geff": (0.8509, 0.0348, 0.0258, 0.0885)},
    },
    "physical": {
        "S": {"DL": (0.0655, 0.3539, 0.0225, 0.0420), "DT": (0.0714, 0.0312, 0.1646, 0.0218),
              "geff": (0.2878, 0.0251, 0.0823, 0.1539)},
        "r": {"DL": (0.1354, 0.7312, 0.0465, 0.0868), "DT": (0.2470, 0.1079, 0.5697, 0.0754),
              "geff": (0.5242, 0.0457, 0.1499, 0.2802)},
    },
}


def est(param, S, se=0.01, qoi="DL", m=100):
    return MiEstimate(param, qoi, S, se, m, np.full(m, S))


def gaussian_pair(rs, n, rho):
    v = rs.normal(size=n)
    return v, rho * v + math.sqrt(1 - rho * rho) * rs.normal(size=n)


class TestRanking:
    @pytest.mark.parametrize("block", ["narrow", "physical"])
    @pytest.mark.parametrize("qoi", ["DL", "DT", "geff"])
    def test_table_normalization(self, block, qoi):
        S = TABLE[block]["S"][qoi]
        t = rank_effects([est(p, s, qoi=qoi) for p, s in zip(PARAMS, S)])
        assert t.r_hat == pytest.approx(TABLE[block]["r"][qoi], abs=1e-3)

    def test_equal(self):
        t = rank_effects([est(p, 0.3) for p in PARAMS])
        assert t.r_hat == pytest.approx([0.25] * 4)

    def test_one_nonzero(self):
        t = rank_effects([est("R", 0.0), est("theta", 0.4), est("d", -1e-4), est("l", 0.0)])
        assert t.r_hat == pytest.approx([0, 1, 0, 0])
        assert t.top() == "theta"
        assert t.S_hat[2] == -1e-4  # raw value kept

    @given(st.lists(st.floats(0, 5), min_size=2, max_size=6).filter(lambda v: sum(v) > 1e-6))
    def test_sums_to_one(self, values):
        t = rank_effects([est(f"p{i}", v) for i, v in enumerate(values)])
        assert abs(t.r_hat.sum() - 1) < 1e-9
        assert np.all((t.r_hat >= 0) & (t.r_hat <= 1))
        assert np.all(t.err_low >= -1e-12) and np.all(t.err_high >= -1e-12)

    def test_errors(self):
        with pytest.raises(ZeroVarianceError):
            rank_effects([est("R", 0.0), est("d", -0.1)])
        with pytest.raises(ValueError):
            rank_effects([est("R", 1.0)])
        with pytest.raises(ValueError):
            rank_effects([est("R", 1.0), est("d", 1.0, qoi="DT")])


class TestEstimator:
    def test_gaussian_oracle(self, rs):
        x, y = gaussian_pair(rs, 200_000, 0.5)
        S, se, trace, info = mutual_information(x, y, m_mc=10_000, seed=1)
        assert S == pytest.approx(-0.5 * math.log(1 - 0.25), rel=0.10)
        assert -0.5 * math.log(0.75) == pytest.approx(0.14384, abs=1e-5)
        assert trace[-1] == S and trace.size == 10_000
        assert se > 0 and info["design"] == "rqmc"

    def test_independent_pair(self, rs):
        x, y = rs.normal(size=100_000), rs.gamma(2.0, size=100_000)
        S, se, _, _ = mutual_information(x, y, m_mc=10_000, seed=2)
        assert abs(S) < 3 * se

    def test_independent_pooled(self):
        vals, ses = [], []
        for seed in range(20):
            rs = np.random.default_rng(100 + seed)
            S, se, _, _ = mutual_information(rs.normal(size=50_000), rs.normal(size=50_000),
                                             m_mc=2_000, seed=seed, warn=False)
            vals.append(S)
            ses.append(se)
        # pooled standard error: root mean square of the per-seed errors
        pooled = math.sqrt(np.mean(np.square(ses)))
        assert abs(np.mean(vals)) < 3 * pooled

    def test_affine_invariance(self, rs):
        x, y = gaussian_pair(rs, 100_000, 0.6)
        S1, se1, _, _ = mutual_information(x, y, seed=3)
        S2, se2, _, _ = mutual_information(x, 4.0 * y - 7.0, seed=3)
        assert abs(S1 - S2) < 2 * max(se1, se2)

    def test_deterministic_cubic_large(self, rs):
        v = rs.normal(size=1_000_000)
        S, _, _, _ = mutual_information(v, v**3, m_mc=10_000, seed=0, warn=False)
        assert S > 1.0

    def test_designs_agree(self, rs):
        x, y = gaussian_pair(rs, 100_000, 0.5)
        a = mutual_information(x, y, design="rqmc", seed=4)
        b = mutual_information(x, y, design="mc", seed=4)
        assert abs(a[0] - b[0]) < 3 * math.hypot(a[1], b[1])
        c = mutual_information(x, y, evaluation="joint", seed=4)
        assert c[3]["evaluation"] == "joint"

    def test_deterministic_seeded(self, rs):
        x, y = gaussian_pair(rs, 20_000, 0.3)
        a = mutual_information(x, y, m_mc=1000, seed=9, warn=False)
        b = mutual_information(x, y, m_mc=1000, seed=9, warn=False)
        assert a[0] == b[0] and np.array_equal(a[2], b[2])

    def test_validation(self, rs):
        x = rs.normal(size=1000)
        with pytest.raises(DimensionMismatchError):
            mutual_information(x, x[:-1])
        with pytest.raises(ValueError):
            mutual_information(x, x, evaluation="pairs")
        with pytest.raises(ValueError):
            mutual_information(x, x, design="sobol")
        with pytest.raises(ValueError):
            mutual_information(x, x, m_mc=1)
        with pytest.raises(ValueError):
            mutual_information(x, x, evaluation="joint", m_mc=5000)

    def test_drift_warning(self, rs):
        # reusing sorted joint pairs makes the running mean drift systematically
        v = np.sort(rs.normal(size=50_000))
        with pytest.warns(ConvergenceWarning, match="drifts"):
            mutual_information(v, v + 0.1 * np.sort(rs.normal(size=v.size)), m_mc=40_000,
                               evaluation="joint")


class TestIndex:
    def test_shared_samples(self):
        m = PriorModel("p1", NARROW)
        b = PcBasis((1, 1, 1, 1))
        sur = {"DL": PcSurrogate(b, np.r_[1.0, np.zeros(15)], "DL"),
               "DT": PcSurrogate(b, np.r_[2.0, np.zeros(15)], "DT")}
        theta, g = gsa_samples(sur, m, 10, 0)
        assert theta.shape == (10, 4)
        assert np.all(g["DL"] == 1.0) and np.all(g["DT"] == 2.0)
        theta1, g1 = gsa_samples(sur["DL"], m, 10, 0)
        assert np.array_equal(theta, theta1) and np.array_equal(g1, g["DL"])

    def test_ranking_of_synthetic(self):
        m = PriorModel("p1", NARROW)
        b = PcBasis((2, 2, 1, 1))
        c = np.zeros(b.n_terms)
        idx = {tuple(a): i for i, a in enumerate(b.multi_indices)}
        c[idx[(0, 0, 0, 0)]], c[idx[(1, 0, 0, 0)]], c[idx[(0, 1, 0, 0)]] = 1.0, 0.5, 0.1
        s = PcSurrogate(b, c, "DL")
        samples = gsa_samples(s, m, 200_000, 0)
        out = [mi_index(s, m, p, m_mc=5000, samples=samples) for p in PARAMS]
        t = rank_effects(out)
        assert t.top() == "R"
        assert abs(out[2].S_hat) < 3 * out[2].std_error + 0.01
        assert out[0].info["marginal"] == "uniform" and out[2].info["marginal"] == "kde"
        assert out[0].n_kde == 200_000 and out[0].M == 5000

    def test_unknown_param(self):
        s = PcSurrogate(PcBasis((1, 1, 1, 1)), np.r_[1.0, 0.5, np.zeros(14)], "DL")
        with pytest.raises(ValueError):
            mi_index(s, PriorModel("p1"), "phi")


class TestCsv:
    def test_mi_and_trace(self, tmp_path):
        e = [est(p, 0.1 * (i + 1), m=1000) for i, p in enumerate(PARAMS)]
        write_mi_csv(tmp_path / "mi.csv", e, {"DL": rank_effects(e)})
        lines = (tmp_path / "mi.csv").read_text().splitlines()
        assert lines[0] == "param,qoi,S_hat,std_error,r_hat,r_err_low,r_err_high,n_kde,m_mc,seed"
        assert len(lines) == 5
        write_trace_csv(tmp_path / "trace.csv", e, points=50)
        rows = (tmp_path / "trace.csv").read_text().splitlines()
        assert rows[0] == "param,qoi,m,running_mean"
        last = [r for r in rows[1:] if r.startswith("R,")][-1].split(",")
        assert last[2] == "1000"
        assert any(r.startswith("R,DL,500,") for r in rows)
