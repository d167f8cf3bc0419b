import dataclasses
import logging
import math

import numpy as np
import pytest

from ternary_mmc import diagnostics as diag
from ternary_mmc import energy as en
from ternary_mmc.energy import ModelParams, PhasePair
from ternary_mmc.grid import Grid
from ternary_mmc.harness import build_initial
from ternary_mmc.hinv import inv_laplacian
from ternary_mmc.scheme import SchemeParams, SchemeState, run

from conftest import admissible, constant_pair


def two_level(g, rng):
    cur = admissible(g, rng)
    prev = admissible(g, rng)
    return SchemeState(cur, prev, 0.2, 2)


def raw_penalties(g, st):
    # increment norms straight from the definitions, no library H^-1 helper
    out = []
    for i in range(2):
        d = st.current[i] - st.previous[i]
        d0 = d - d.mean()
        m1 = g.h**2 * np.sum(d0 * inv_laplacian(g, d0))
        out.append((m1, g.h**2 * np.sum(d * d)))
    return out


class TestModifiedEnergies:
    def test_stationary_equals_total(self, params):
        g = Grid(8, 64.0)
        c = constant_pair(g, 0.2, 0.3)
        st = SchemeState(c, c, 0.1, 1)
        sp = SchemeParams.from_preset(params, 0.1)
        gh = en.energy_total(g, c, params)
        assert diag.modified_energy_E(g, st, params, sp) == gh
        assert diag.modified_energy_F(g, st, params, sp) == gh

    def test_E_penalties(self, rng, params):
        g = Grid(8, 64.0)
        st = two_level(g, rng)
        sp = SchemeParams.from_preset(params, 0.05)
        (m1, l1), (m2, l2) = raw_penalties(g, st)
        dt = 0.05
        expected = (m1 / (4 * dt * params.mob1) + m2 / (4 * dt * params.mob2)
                    + (2 * 4 + 3 * 10 + 1.6) / 2 * l1 + (2 * 4 + 10 + 3 * 1.6) / 2 * l2)
        got = diag.modified_energy_E(g, st, params, sp) - en.energy_total(g, st.current, params)
        assert math.isclose(got, expected, rel_tol=1e-10)

    def test_F_penalties(self, rng, params):
        g = Grid(8, 64.0)
        st = two_level(g, rng)
        sp = SchemeParams.from_preset(params, 0.05)
        (m1, l1), (m2, l2) = raw_penalties(g, st)
        expected = 3 / (4 * 0.05) * (m1 + m2) + 10 * l1 + 1.6 * l2
        got = diag.modified_energy_F(g, st, params, sp) - en.energy_total(g, st.current, params)
        assert math.isclose(got, expected, rel_tol=1e-10)

    def test_modified_energies_dominate(self, rng, params):
        g = Grid(8, 64.0)
        sp = SchemeParams.from_preset(params, 0.05)
        for _ in range(20):
            st = two_level(g, rng)
            gh = en.energy_total(g, st.current, params)
            assert diag.modified_energy_E(g, st, params, sp) >= gh
            assert diag.modified_energy_F(g, st, params, sp) >= gh

    def test_F_warns_for_nonunit_mobility(self, rng, caplog):
        params = ModelParams(mob1=2.0)
        g = Grid(8, 64.0)
        st = two_level(g, rng)
        with caplog.at_level(logging.WARNING):
            diag.modified_energy_F(g, st, params, SchemeParams.from_preset(params, 0.05))
        assert "unit mobilities" in caplog.text


class TestRecord:
    def test_fields(self, rng, params):
        g = Grid(8, 64.0)
        st = two_level(g, rng)
        sp = SchemeParams.from_preset(params, 0.05)
        rec = diag.record(g, st, params, sp)
        p = st.current
        assert rec.step == 2 and rec.time == 0.2
        assert rec.mass1 == pytest.approx(p.phi1.mean(), abs=1e-15)
        assert rec.min1 == p.phi1.min() and rec.max2 == p.phi2.max()
        assert rec.min_sum_complement == p.phi3.min()
        assert rec.gibbs_margin == min(rec.min1, rec.min2, rec.min_sum_complement) > 0
        assert rec.solver_iters == 0 and rec.solver_grad_norm == 0.0

    def test_record_does_not_mutate(self, rng, params):
        g = Grid(8, 64.0)
        st = two_level(g, rng)
        before = st.current.copy()
        diag.record(g, st, params, SchemeParams.from_preset(params, 0.05))
        assert np.array_equal(before.phi1, st.current.phi1)

    def test_F_nan_for_nonunit_mobility(self, rng):
        params = ModelParams(mob2=3.0)
        g = Grid(8, 64.0)
        rec = diag.record(g, two_level(g, rng), params, SchemeParams.from_preset(params, 0.05))
        assert math.isnan(rec.energy_f_mod)


def series(values, attr="energy_e_mod"):
    recs = []
    for k, v in enumerate(values):
        base = dict(step=k, time=0.1 * k, energy_gh=v, energy_e_mod=v, energy_f_mod=v,
                    mass1=0.1, mass2=0.4, min1=0.05, max1=0.2, min2=0.3, max2=0.5,
                    min_sum_complement=0.3, gibbs_margin=0.05)
        base[attr] = v
        recs.append(diag.DiagnosticsRecord(**base))
    return recs


class TestCertify:
    def test_single_record(self):
        assert diag.certify(series([1.0]), "E").ok

    def test_names_uptick_step(self):
        cert = diag.certify(series([5.0, 4.0, 3.0, 3.5, 2.0]), "E")
        assert not cert.ok and cert.first_decay_violation == 3
        assert "step 3" in cert.summary()

    def test_step_zero_is_excluded(self):
        assert diag.certify(series([1.0, 2.0, 1.5]), "E").ok

    def test_slack(self):
        assert diag.certify(series([1.0, 1.0, 1.0 + 5e-11]), "E").ok
        assert not diag.certify(series([1.0, 1.0, 1.0 + 5e-10]), "E").ok

    def test_mass_and_positivity(self):
        recs = series([3.0, 2.0, 1.0])
        recs[2] = dataclasses.replace(recs[2], mass1=0.1 + 2e-12)
        recs[1] = dataclasses.replace(recs[1], gibbs_margin=0.0)
        cert = diag.certify(recs)
        assert cert.first_mass_violation == 2 and cert.first_positivity_violation == 1
        assert not cert.ok

    def test_choose_energy(self, params):
        assert diag.choose_energy(params, SchemeParams.from_preset(params, 0.1, "theorem")) == "E"
        assert diag.choose_energy(params, SchemeParams.from_preset(params, 0.1, "alternate")) == "F"
        assert diag.choose_energy(params, SchemeParams.from_preset(params, 0.1)) is None

    def test_short_certified_run(self, params):
        g = Grid(16, 64.0)
        sp = SchemeParams.from_preset(params, 1e-3, "theorem")
        _, recs = run(g, build_initial("example2", g), params, sp, 0.02)
        assert diag.certify(recs, "E").ok
