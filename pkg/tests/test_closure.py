import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poreuq.bayesnet import NARROW, PHYSICAL, PriorModel, sample_parameters
from poreuq.closure import (DiffusivityField, EffectiveProps, assemble_closure, effective_tensor,
                            forward_model, solve_closure)
from poreuq.errors import ConvergenceError, DisconnectedPoreError
from poreuq.geometry import PoreMask, PoreParams, rasterize_pore
from poreuq import _kernels


def channel(n, lo, hi, vertical=False):
    f = np.zeros((n, n), bool)
    f[:, lo:hi] = True
    if vertical:
        f = f.T.copy()
    return PoreMask(f, (0.0, 1.0, 0.0, 1.0))


def solved(mask, **kw):
    c = solve_closure(mask, **kw)
    return c, effective_tensor(c, mask, full=True)


class TestOracles:
    def test_all_fluid(self):
        m = PoreMask(np.ones((24, 40), bool), (0.0, 2.0, 0.0, 3.0))
        c, T = solved(m)
        assert np.allclose(c.chi, 0.0, atol=1e-12)
        assert T == pytest.approx(np.eye(2), abs=1e-6)

    def test_horizontal_channel(self):
        c, T = solved(channel(256, 64, 192))
        assert T[0, 0] == pytest.approx(0.5, abs=0.01)
        assert abs(T[1, 1]) < 0.01
        # no wall face has a normal along x and the sides are zero
        assert np.allclose(c.chi1[~np.isnan(c.chi1)], 0.0, atol=1e-12)

    def test_vertical_channel(self):
        _, T = solved(channel(256, 64, 192, vertical=True))
        assert T[1, 1] == pytest.approx(0.5, abs=0.01)
        assert abs(T[0, 0]) < 0.01

    @pytest.mark.parametrize("phi_cells", [32, 77, 200])
    def test_channel_fraction(self, phi_cells):
        n = 256
        _, T = solved(channel(n, 10, 10 + phi_cells))
        assert T[0, 0] == pytest.approx(phi_cells / n, rel=0.02)


class TestSolver:
    @pytest.fixture(scope="class")
    @staticmethod
    def case():
        m = rasterize_pore(PoreParams(30, 0.3, 6, 12), 96)
        return m, solve_closure(m, tol=1e-8)

    def test_residual_reevaluated(self, case):
        m, c = case
        for j in (0, 1):
            s = assemble_closure(m, j=j)
            x = c.chi[j][m.active]
            rel = np.linalg.norm(s.A @ x - s.rhs) / np.linalg.norm(s.rhs)
            assert rel <= 2e-8

    def test_residual_history_monotone(self, case):
        _, c = case
        for h in c.histories:
            assert h.size > 1
            assert np.all(np.diff(h) <= 1e-12 * h[:-1])

    def test_side_fluxes_balance(self, case):
        # the flux through each Dirichlet side equals DL |Y| / (2a)
        m, c = case
        s = assemble_closure(m, j=0)
        f = s.faces[0]
        x = c.chi1[m.active]
        side = f.q < 0
        grad = f.sign[side] * (0.0 - x[f.p[side]]) / f.dist[side]
        flux = f.D[side] * f.length[side] * (1.0 + grad)
        left, right = flux[f.sign[side] < 0].sum(), flux[f.sign[side] > 0].sum()
        DL = effective_tensor(c, m)[0]
        width = m.extent[1] - m.extent[0]
        assert left == pytest.approx(right, rel=1e-6)
        assert left == pytest.approx(DL * m.area / width, rel=1e-6)

    def test_symmetry_of_chi(self, case):
        # chi_1 is odd and chi_2 even under the mirror x -> -x
        _, c = case
        assert np.allclose(c.chi1, -c.chi1[::-1], equal_nan=True, atol=1e-6)
        assert np.allclose(c.chi2, c.chi2[::-1], equal_nan=True, atol=1e-6)

    def test_convergence_error(self):
        m = rasterize_pore(PoreParams(30, 0.3, 6, 12), 64)
        with pytest.raises(ConvergenceError):
            solve_closure(m, maxiter=3)
        c = solve_closure(m, maxiter=3, strict=False)
        assert c.converged == (False, False)

    def test_disconnected(self):
        f = np.zeros((32, 32), bool)
        f[:, 2:8] = True
        f[:, 20:26] = True
        with pytest.raises(DisconnectedPoreError):
            solve_closure(PoreMask(f, (0, 1, 0, 1)))

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            solve_closure(channel(32, 8, 24), tol=0.0)

    def test_periodic_mean_zero(self):
        # fully periodic: every component floats and is shifted to zero mean
        m = rasterize_pore(PoreParams(30, 0.3, 6, 12), 64)
        c = solve_closure(m, bc="periodic")
        assert c.means() == pytest.approx([0.0, 0.0], abs=1e-10)

    def test_unknown_bc(self):
        with pytest.raises(ValueError):
            assemble_closure(channel(32, 8, 24), bc="robin")

    def test_backend_equivalence(self):
        m = rasterize_pore(PoreParams(25, 0.4, 7, 10), 64)
        a = solve_closure(m, backend="python")
        b = solve_closure(m, backend=_kernels.BACKEND)
        assert np.allclose(a.chi, b.chi, atol=1e-10, equal_nan=True)
        assert a.iterations == b.iterations

    def test_csv_dump(self, tmp_path):
        m = channel(16, 4, 12)
        solve_closure(m).to_csv(tmp_path)
        rows = (tmp_path / "chi1.csv").read_text().splitlines()
        assert len(rows) == 16
        assert rows[0].split(",")[0] == ""


class TestEffective:
    @pytest.mark.parametrize("v", [(30, 0.3, 6, 12), (45, 1.0, 30, 40), (10, 0.07, 4, 8)])
    def test_offdiagonal_vanishes(self, v):
        m = rasterize_pore(PoreParams(*v), 256)
        T = effective_tensor(solve_closure(m), m, full=True)
        assert abs(T[0, 1]) < 5e-3 and abs(T[1, 0]) < 5e-3

    @settings(max_examples=12)
    @given(st.integers(0, 10_000))
    def test_bounds(self, seed):
        t = sample_parameters(PriorModel("p1", PHYSICAL), 1, seed).theta[0]
        e = forward_model(PoreParams.from_array(t), resolution=48)
        assert 0.0 <= e.DL <= 1.0 and 0.0 <= e.DT <= 1.0
        assert 0.0 < e.porosity < 1.0 and e.geff > 0

    def test_lower_tube_ratio_lowers_dt(self):
        p = PoreParams(30, 0.4, 8, 20)
        base = forward_model(p, resolution=64)
        slow = forward_model(p, DiffusivityField(tube_ratio=0.2), resolution=64)
        assert slow.DT < base.DT
        assert 0.0 <= slow.DL <= 1.0

    def test_diffusivity_validation(self):
        with pytest.raises(ValueError):
            DiffusivityField(tube_ratio=0.0)

    def test_choked_tube(self):
        e = forward_model(PoreParams(30, 0.5, 0.5, 40), resolution=128)
        assert e.DT < 0.1 * e.DL

    def test_dt_monotone_in_d(self):
        dt = [forward_model(PoreParams(30, 0.4, d, 12), resolution=128).DT
              for d in (4, 8, 12, 16, 20)]
        assert np.all(np.diff(dt) >= 0)

    def test_deterministic(self):
        p = PoreParams(20, 0.5, 7, 9)
        assert forward_model(p, resolution=64) == forward_model(p, resolution=64)

    def test_props_dict(self):
        e = EffectiveProps(0.5, 0.25, 0.1, 0.4)
        assert e.as_dict() == {"DL": 0.5, "DT": 0.25, "geff": 0.1, "porosity": 0.4}


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_richardson_ratio(seed):
    t = sample_parameters(PriorModel("p1", NARROW), 1, seed).theta[0]
    dl = [forward_model(PoreParams.from_array(t), resolution=r).DL for r in (64, 128, 256, 512)]
    diffs = np.abs(np.diff(dl))
    assert np.all(diffs[1:] < diffs[:-1])
    ratios = diffs[:-1] / diffs[1:]
    assert np.all((ratios >= 1.5) & (ratios <= 4.0))
