import math

import numpy as np
import pytest

from ternary_mmc import harness as hz
from ternary_mmc.energy import GibbsDomainError, ModelParams, PhasePair
from ternary_mmc.grid import Grid
from ternary_mmc.storage import store_snapshot

from conftest import constant_pair


class TestInitial:
    def test_example1_formula(self):
        g = Grid(16, 64.0)
        p = hz.build_initial("example1", g)
        x, y = g.centers()
        bump = 0.01 * np.cos(3 * np.pi * x / 32) * np.cos(3 * np.pi * y / 32)
        assert np.array_equal(p.phi1, 0.1 + bump) and np.array_equal(p.phi2, 0.5 + bump)
        assert 0.09 <= p.phi1.min() and p.phi1.max() <= 0.11

    def test_example2_seeded(self):
        g = Grid(16, 64.0)
        a = hz.build_initial("example2", g, seed=3)
        b = hz.build_initial("example2", g, seed=3)
        assert np.array_equal(a.phi1, b.phi1) and np.array_equal(a.phi2, b.phi2)
        r = a.phi1 - 0.1
        assert np.abs(r).max() <= 0.01
        assert np.allclose(a.phi2 - 0.4, r, atol=1e-15)
        assert a.means()[0] == pytest.approx(0.1 + r.mean(), abs=1e-15)
        c = hz.build_initial("example2", g, seed=4)
        assert not np.array_equal(a.phi1, c.phi1)

    def test_example2_independent(self):
        g = Grid(16, 64.0)
        p = hz.build_initial("example2", g, seed=3, independent_noise=True)
        assert not np.allclose(p.phi1 - 0.1, p.phi2 - 0.4)

    def test_file(self, tmp_path):
        g = Grid(8, 64.0)
        p = constant_pair(g, 0.2, 0.3)
        store_snapshot(tmp_path / "s.mmc", p, 64.0, 0.0, 0)
        q = hz.build_initial("file", g, path=tmp_path / "s.mmc")
        assert np.array_equal(p.phi1, q.phi1)
        with pytest.raises(ValueError):
            hz.build_initial("file", Grid(16, 64.0), path=tmp_path / "s.mmc")
        bad = constant_pair(g, 0.7, 0.5)
        store_snapshot(tmp_path / "bad.mmc", bad, 64.0, 0.0, 0)
        with pytest.raises(GibbsDomainError):
            hz.build_initial("file", g, path=tmp_path / "bad.mmc")

    def test_unknown(self):
        with pytest.raises(ValueError):
            hz.build_initial("example3", Grid(8, 1.0))


class TestTransfer:
    @pytest.mark.parametrize("mode", ["nearest", "bilinear"])
    def test_constant(self, mode):
        assert np.all(hz.coarse_to_fine(np.full((4, 4), 2.5), mode) == 2.5)

    def test_nearest_spike(self):
        u = np.zeros((4, 4))
        u[1, 2] = 1.0
        f = hz.coarse_to_fine(u, "nearest")
        expected = np.zeros((8, 8))
        expected[2:4, 4:6] = 1.0
        assert np.array_equal(f, expected)

    def test_nearest_preserves_mean(self, rng):
        u = rng.standard_normal((8, 8))
        assert hz.coarse_to_fine(u, "nearest").mean() == pytest.approx(u.mean(), abs=1e-15)

    def test_bilinear_mode_second_order(self):
        errs = []
        for n in (16, 32, 64):
            gc, gf = Grid(n, 64.0), Grid(2 * n, 64.0)
            xc, yc = gc.centers()
            xf, yf = gf.centers()
            f = lambda x, y: np.cos(2 * np.pi * x / 64) * np.sin(4 * np.pi * y / 64)  # noqa: E731
            errs.append(np.abs(hz.coarse_to_fine(f(xc, yc), "bilinear") - f(xf, yf)).max())
        rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(rates) > 1.9

    def test_bilinear_exact_on_linear_interior(self):
        g = Grid(8, 8.0)
        x, _ = g.centers()
        f = hz.coarse_to_fine(x, "bilinear")
        xf, _ = Grid(16, 8.0).centers()
        # rows away from the periodic wrap reproduce the linear function
        assert np.allclose(f[2:-2], xf[2:-2], atol=1e-14)

    def test_rejects(self):
        with pytest.raises(ValueError):
            hz.coarse_to_fine(np.zeros((4, 6)))
        with pytest.raises(ValueError):
            hz.coarse_to_fine(np.zeros((4, 4)), "cubic")


class TestCauchy:
    def test_identical_after_transfer(self):
        gc, gf = Grid(8, 64.0), Grid(16, 64.0)
        c = constant_pair(gc, 0.2, 0.3)
        f = constant_pair(gf, 0.2, 0.3)
        (l1, l2), (i1, i2) = hz.cauchy_difference(f, c, gf)
        assert l1 == l2 == i1 == i2 == 0.0

    def test_rejects_mismatch(self):
        gc, gf = Grid(8, 64.0), Grid(32, 64.0)
        with pytest.raises(ValueError):
            hz.cauchy_difference(constant_pair(gf, 0.2, 0.3), constant_pair(gc, 0.2, 0.3), gf)
        g16 = Grid(16, 64.0)
        with pytest.raises(ValueError, match="times"):
            hz.cauchy_difference(constant_pair(g16, 0.2, 0.3), constant_pair(gc, 0.2, 0.3), g16,
                                 fine_time=0.4, coarse_time=0.3)

    def test_rates(self):
        assert hz.convergence_rate(4e-3, 1e-3) == pytest.approx(2.0)
        assert math.isnan(hz.convergence_rate(1e-15, 1e-16))


class TestStudy:
    def test_path_validation(self):
        with pytest.raises(ValueError):
            hz.RefinementPath((16, 48))
        with pytest.raises(ValueError):
            hz.RefinementPath((16,))
        with pytest.raises(ValueError):
            hz.RefinementPath((16, 32), t_final=0.401)
        path = hz.RefinementPath((16, 32))
        assert [g.n for g in path.grids] == [16, 32]
        assert path.dt(path.grids[0]) == pytest.approx(0.008)

    def test_constant_data_gives_zero_rows(self, monkeypatch):
        def flat(kind, grid, seed=0, path=None, independent_noise=False):
            return constant_pair(grid, 0.2, 0.3)
        monkeypatch.setattr(hz, "build_initial", flat)
        path = hz.RefinementPath((8, 16, 32), t_final=0.08)
        rows, _ = hz.run_convergence_study(path)
        assert all(e < 1e-12 for r in rows for e in (r.err_l2_phi1, r.err_linf_phi2))
        assert all(math.isnan(v) for v in rows[1].rates)

    def test_small_study_rate_and_table(self):
        path = hz.RefinementPath((16, 32, 64), t_final=0.4)
        rows, sols = hz.run_convergence_study(path)
        assert len(rows) == 2 and rows[0].label == "16^2-32^2"
        assert math.isnan(rows[0].rate_l2_phi1)
        assert all(1.7 <= r <= 2.2 for r in rows[1].rates)
        table = hz.format_table(rows)
        assert "32^2-64^2" in table and "rate" in table

    def test_halving_dt_coefficient(self):
        # errors along the refinement path scale like (1/2)^2 per level for
        # either time-step coefficient: fit the log2 slope over three levels
        for coef in (0.002, 0.001):
            path = hz.RefinementPath((16, 32, 64, 128), dt_coef=coef, t_final=0.064)
            rows, _ = hz.run_convergence_study(path)
            errs = np.array([r.err_l2_phi1 for r in rows])
            slope = -np.polyfit(np.arange(len(errs)), np.log2(errs), 1)[0]
            assert 1.7 <= slope <= 2.2
