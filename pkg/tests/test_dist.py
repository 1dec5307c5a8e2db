import math
import warnings

import numpy as np
import pytest
from scipy import stats

from conftest import tv
from gnbp.dist import (
    ModelParams,
    Parameterization,
    ProbabilityClampWarning,
    gnb_log_pmf,
    gnb_moments,
    gnb_pmf_series,
    gnb_sample,
    guard_prob,
    levy_mass,
    nb_log_pmf,
    tnb_log_pmf,
    tnb_mean,
    tnb_sample,
)
from gnbp.special import build_stirling

GRID_A = (-4.0, -1.0, 0.0, 0.5, 0.9)
GRID_P = (0.05, 0.15, 0.3, 0.45, 0.6)
REPARAM = Parameterization.REPARAMETERIZED


class TestParams:
    def test_validation(self):
        for bad in [dict(mass=0), dict(mass=-1), dict(discount=1.0), dict(prob=0.0), dict(prob=1.0)]:
            kw = dict(mass=1.0, discount=0.0, prob=0.5) | bad
            with pytest.raises(ValueError):
                ModelParams(**kw)

    def test_new_weight(self):
        assert ModelParams(1.0, 0.5, 0.25).new_weight == pytest.approx(2.0)
        assert ModelParams(1.0, 0.5, 0.75, REPARAM).new_weight == pytest.approx(2.0)

    def test_string_parameterization(self):
        assert ModelParams(1.0, 0.0, 0.5, "reparameterized").reparameterized

    def test_mapping_gives_same_weight(self):
        h = ModelParams(1.3, -2.0, 0.7, REPARAM)
        assert h.to_original().new_weight == pytest.approx(h.new_weight, rel=1e-14)
        assert levy_mass(h.to_original()) == pytest.approx(levy_mass(h), rel=1e-13)


class TestGuard:
    def test_clamp_warns(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            assert guard_prob(1.0 - 1e-9) == pytest.approx(1.0 - 1e-6)
            assert guard_prob(1e-9) == pytest.approx(1e-6)
        assert sum(issubclass(w.category, ProbabilityClampWarning) for w in caught) == 2

    def test_inside_untouched(self):
        assert guard_prob(0.3) == 0.3

    @pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
    def test_rejects_outside(self, p):
        with pytest.raises(ValueError):
            guard_prob(p)


class TestTnb:
    def test_unit_value(self):
        assert tnb_log_pmf(1, 0.5, 0.75) == pytest.approx(math.log(0.75), rel=1e-14)

    def test_logarithmic_limit(self):
        assert math.exp(tnb_log_pmf(1, 0.0, 0.5)) == pytest.approx(0.5 / math.log(2.0), rel=1e-14)
        assert math.exp(tnb_log_pmf(1, 0.0, 0.5)) == pytest.approx(0.72135, abs=1e-5)

    def test_limit_matches_scipy_logser(self):
        u = np.arange(1, 40)
        assert np.allclose(tnb_log_pmf(u, 0.0, 0.8), stats.logser.logpmf(u, 0.8), rtol=1e-12)

    def test_limit_continuity(self):
        u = np.arange(1, 30)
        assert np.allclose(tnb_log_pmf(u, 1e-7, 0.4), tnb_log_pmf(u, 0.0, 0.4), atol=1e-6)

    @pytest.mark.parametrize("a", GRID_A)
    def test_ratio_recurrence(self, a):
        u = np.arange(1, 30)
        lp = tnb_log_pmf(u, a, 0.6)
        assert np.allclose(np.exp(np.diff(lp)), 0.6 * (u[:-1] - a) / (u[:-1] + 1), rtol=1e-12)

    @pytest.mark.parametrize("a", GRID_A)
    @pytest.mark.parametrize("p", GRID_P)
    def test_normalized(self, a, p):
        probs = np.exp(tnb_log_pmf(np.arange(1, 3000), a, p))
        assert probs[-1] < 1e-14
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("a", [-2.0, 0.0, 0.5])
    @pytest.mark.parametrize("t", [0.3, 0.7])
    def test_pgf(self, a, t):
        p = 0.6
        u = np.arange(1, 3000)
        series = math.fsum(np.exp(u * math.log(t) + tnb_log_pmf(u, a, p)))
        if a == 0.0:
            closed = math.log1p(-p * t) / math.log1p(-p)
        else:
            closed = (1 - (1 - p * t) ** a) / (1 - (1 - p) ** a)
        assert series == pytest.approx(closed, rel=1e-8)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            tnb_log_pmf(0, 0.5, 0.5)

    def test_mean_closed_form(self):
        assert tnb_mean(0.5, 0.75) == pytest.approx(1.5)
        assert tnb_mean(0.0, 0.5) == pytest.approx(0.5 / (0.5 * math.log(2.0)))

    def test_sample_mean_half(self, rng):
        draws = tnb_sample(0.5, 0.75, rng, size=1_000_000)
        assert draws.min() >= 1
        assert abs(draws.mean() - 1.5) < 0.01

    def test_sample_mean_logarithmic(self, rng):
        draws = tnb_sample(0.0, 0.5, rng, size=1_000_000)
        assert abs(draws.mean() - 1.0 / (2 * 0.5 * math.log(2.0))) < 0.01

    def test_scalar_draws(self, rng):
        draws = [tnb_sample(-1.0, 0.5, rng) for _ in range(20000)]
        assert min(draws) >= 1
        assert isinstance(draws[0], int)
        assert abs(np.mean(draws) - tnb_mean(-1.0, 0.5)) < 4 * np.std(draws) / math.sqrt(len(draws))

    def test_sample_histogram(self, rng):
        draws = tnb_sample(-4.0, 0.3, rng, size=200_000)
        emp = np.bincount(draws, minlength=60)[1:60] / draws.size
        assert tv(emp, np.exp(tnb_log_pmf(np.arange(1, 60), -4.0, 0.3))) < 0.01


class TestGnb:
    def test_zero_count(self):
        params = ModelParams(1.0, 0.5, 0.75)
        value = gnb_log_pmf(0, params, build_stirling(1, 0.5))
        assert value == pytest.approx(-(1 - 0.25**0.5) / (0.5 * 0.75**0.5), rel=1e-12)
        assert value == pytest.approx(-1.15470, abs=1e-5)

    def test_nb_limit(self):
        params = ModelParams(1.7, 1e-9, 0.6)
        tri = build_stirling(40, 1e-9)
        for m in range(41):
            assert gnb_log_pmf(m, params, tri) == pytest.approx(float(nb_log_pmf(m, 1.7, 0.6)), abs=1e-6)

    def test_nb_log_pmf_matches_scipy(self):
        m = np.arange(30)
        assert np.allclose(nb_log_pmf(m, 2.5, 0.3), stats.nbinom.logpmf(m, 2.5, 0.7), rtol=1e-12)

    @pytest.mark.parametrize("a", GRID_A)
    @pytest.mark.parametrize("p", GRID_P)
    def test_normalized(self, a, p):
        params = ModelParams(1.0, a, p)
        top = 500
        tri = build_stirling(top, a)
        probs = np.exp([gnb_log_pmf(m, params, tri) for m in range(top + 1)])
        assert probs[-1] < 1e-14
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("a", [-2.0, -0.5, 0.3, 0.8])
    def test_series_form(self, a):
        params = ModelParams(1.4, a, 0.55)
        tri = build_stirling(10, a)
        for m in range(11):
            assert math.exp(gnb_log_pmf(m, params, tri)) == pytest.approx(gnb_pmf_series(m, params), rel=1e-8)

    def test_scale_identity(self):
        h = ModelParams(0.8, 0.6, 0.35, REPARAM)
        g = h.to_original()
        tri = build_stirling(30, 0.6)
        for m in range(31):
            assert gnb_log_pmf(m, h, tri) == pytest.approx(gnb_log_pmf(m, g, tri), rel=1e-12, abs=1e-12)

    def test_triangle_mismatch(self):
        with pytest.raises(ValueError):
            gnb_log_pmf(3, ModelParams(1.0, 0.5, 0.5), build_stirling(3, 0.4))
        with pytest.raises(ValueError):
            gnb_log_pmf(5, ModelParams(1.0, 0.5, 0.5), build_stirling(3, 0.5))

    def test_moments(self):
        assert gnb_moments(ModelParams(1.0, 0.0, 0.5)) == pytest.approx((1.0, 2.0))
        assert gnb_moments(ModelParams(2.0, 0.5, 0.5)) == pytest.approx((2.0, 3.0))

    def test_sample_mean(self, rng):
        draws = gnb_sample(ModelParams(1.0, 0.5, 0.5), rng, size=1_000_000)
        assert abs(draws.mean() - 1.0) < 0.01

    @pytest.mark.parametrize("params", [ModelParams(1.0, -1.0, 0.4), ModelParams(1.5, 0.6, 0.7)])
    def test_sample_moments_within_3se(self, params, rng):
        draws = gnb_sample(params, rng, size=400_000)
        mean, var = gnb_moments(params)
        assert abs(draws.mean() - mean) < 3 * math.sqrt(var / draws.size)

    def test_nb_case_moments(self, rng):
        draws = gnb_sample(ModelParams(2.0, 0.0, 0.5), rng, size=400_000)
        assert draws.mean() == pytest.approx(2.0, abs=0.02)
        assert draws.var() == pytest.approx(4.0, rel=0.03)

    def test_sample_matches_pmf(self, rng):
        params = ModelParams(1.0, 0.5, 0.5)
        draws = gnb_sample(params, rng, size=1_000_000)
        tri = build_stirling(50, 0.5)
        pmf = np.exp([gnb_log_pmf(m, params, tri) for m in range(51)])
        emp = np.bincount(draws, minlength=51)[:51] / draws.size
        assert tv(emp, pmf) < 0.005

    def test_scalar_sample(self, rng):
        value = gnb_sample(ModelParams(1.0, 0.5, 0.5), rng)
        assert isinstance(value, int) and value >= 0
