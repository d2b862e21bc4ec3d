import math

import numpy as np
import pytest

from oracles import conjugate_grid
from exrisk.bounds import (BoundConfig, bousquet_upper, check_regime, delta_threshold, klein_rio_lower,
                           lemma_dev_thresholds, r0_squared, r0_squared_closed)
from exrisk.numerics import ConjugatePair


def cfg(**kw):
    base = dict(A1=1.0, A2=1.0, A_J=2.0, A_inf=1.0, n=100, D=4)
    base.update(kw)
    return BoundConfig(**base)


class TestConfig:
    def test_derived_constants(self):
        c = cfg(A1=0.5, A2=1.5)
        assert c.K == c.C == 4.0
        assert c.m_n == 10.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            cfg(A_J=-1.0)
        with pytest.raises(ValueError):
            cfg(n=0)


class TestR0:
    def test_example(self):
        c = cfg()
        assert r0_squared(c) == pytest.approx(1.28, abs=1e-12)
        assert r0_squared_closed(c) == pytest.approx(1.28, abs=1e-12)
        # oracle: grid supremum of the conjugate at v = 8K/(m_n C^2) = 0.2
        assert 2 * 16 * conjugate_grid(lambda u: u ** 2 / 4, 0.2) == pytest.approx(1.28, abs=1e-6)

    def test_tabulated_phi_agrees(self):
        c = cfg()
        tab = ConjugatePair(phi=lambda u: u ** 2 / 4, u_max=10, grid_points=10**6)
        assert r0_squared(c, tab) == pytest.approx(1.28, abs=1e-8)

    def test_limits(self):
        assert r0_squared(cfg(A_J=0.0)) == 0.0
        assert r0_squared(cfg(A_J=1e-8)) < 1e-15
        assert r0_squared(cfg(n=10**12)) < 1e-9


class TestTalagrandTypeBounds:
    def test_t_zero(self):
        c = cfg()
        assert bousquet_upper(c, 0.1, 0.03, 0.02, 0.0) == 0.03
        assert klein_rio_lower(c, 0.1, 0.03, 0.02, 0.0) == 0.03

    def test_degenerate(self):
        c = cfg()
        assert bousquet_upper(c, 0.1, 0.0, 0.0, 1.5) == pytest.approx(2 * 4 * 1.5 / 300)

    def test_numeric_example(self):
        c = cfg()
        value = bousquet_upper(c, 0.1, 0.01, math.sqrt(0.0004), 1.0)
        assert value == pytest.approx(0.01 + math.sqrt(0.003208) + 8 / 300, abs=1e-12)
        assert value == pytest.approx(0.09331, abs=1e-5)

    def test_lower_below_upper(self):
        c = cfg()
        for t in (0.5, 1, 3):
            assert klein_rio_lower(c, 0.1, 0.02, 0.01, t) < 0.02 < bousquet_upper(c, 0.1, 0.02, 0.01, t)


class TestDeviationThresholds:
    def test_t_zero(self):
        d = lemma_dev_thresholds(cfg(), 0.3, 0.0)
        assert d.upper == 0.0 and d.lower == 0.0

    def test_homogeneity(self):
        c = cfg()
        a, b = lemma_dev_thresholds(c, 0.3, 1.0), lemma_dev_thresholds(c, 0.3, 4.0)
        lin_u = 2 * c.K / (3 * c.n)
        assert b.upper - 4 * lin_u == pytest.approx(2 * (a.upper - lin_u), rel=1e-12)
        lin_l = c.K / c.n
        assert b.lower - 4 * lin_l == pytest.approx(2 * (a.lower - lin_l), rel=1e-12)

    def test_dominates_talagrand_thresholds(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            c = cfg(A1=rng.uniform(0.1, 2), A2=rng.uniform(0.1, 2), A_J=rng.uniform(0, 3), n=int(rng.integers(10, 10**5)))
            s, t = rng.uniform(0, 1), rng.uniform(0, 10)
            r0sq = r0_squared(c)
            sigma = rng.uniform(0, c.C * s)
            E = rng.uniform(0, (2 * c.C ** 2 * s ** 2 + r0sq) / (8 * c.K))
            dev = lemma_dev_thresholds(c, s, t)
            assert bousquet_upper(c, s, E, sigma, t) - E <= dev.upper * (1 + 1e-12)
            assert E - klein_rio_lower(c, s, E, sigma, t) <= dev.lower * (1 + 1e-12)

    def test_z_uses_reference_point(self):
        c = cfg()
        assert lemma_dev_thresholds(c, 0.3, 2.0, s_tilde0=0.3).z == pytest.approx(lemma_dev_thresholds(c, 0.3, 2.0).lower)


class TestDelta:
    def test_example(self):
        c = cfg(A_J=0.0, n=10**4, A1=1.0, A2=1.0)
        u = math.log(401)
        assert u == pytest.approx(5.9940, abs=1e-4)
        assert delta_threshold(c, 0.0, 0.1) == pytest.approx(math.sqrt(u / 1e4) + u / 1e4, abs=1e-15)
        assert delta_threshold(c, 0.0, 0.1) == pytest.approx(0.02508, abs=1e-5)

    def test_grows_without_bound(self):
        c = cfg()
        assert delta_threshold(c, 1e6, 0.01) > 100

    def test_monotone_in_t(self):
        c = cfg()
        vals = [delta_threshold(c, t, 0.05) for t in np.linspace(0, 20, 50)]
        assert np.all(np.diff(vals) >= 0)

    def test_first_branch(self):
        c = cfg(A_J=4.0, A_inf=4.0, n=10**4, c0=0.0)
        assert delta_threshold(c, 1.0, 0.1) == pytest.approx(4 * 0.1 / 10)


class TestRegime:
    def test_all_pass_far_out(self):
        n = math.exp(20)
        c = BoundConfig(1, 1, 1.0, 1.0, int(round(n)), 500, A0=100.0)
        r = check_regime(c)
        assert r[0].passed and r[1].passed
        assert r[0].lhs == pytest.approx(400, rel=1e-6) and r[1].rhs == pytest.approx(1101, rel=1e-3)

    def test_first_fails(self):
        r = check_regime(BoundConfig(1, 1, 1.0, 1.0, 10**6, 100))
        assert not r[0].passed and r[0].lhs == pytest.approx(190.9, abs=0.1)

    def test_second_fails_when_D_equals_n(self):
        assert not check_regime(BoundConfig(1, 1, 1.0, 1.0, 1000, 1000))[1].passed
