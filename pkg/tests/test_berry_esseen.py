"""Tests for Kolmogorov distances, rate sweeps and the bound audits."""

import math

import numpy as np
import pytest

from fracou.berry_esseen import (AUDIT_NAMES, FAIL, INCONCLUSIVE, PASS, KolmogorovReport,
                                 MonteCarloConfig, a1_closed, a1_integral, a2_integral, bound_audit,
                                 dkw_halfwidth, estimator_draws, judge_rate, kolmogorov_vs_normal,
                                 mc_experiment, rate_sweep, theoretical_exponent)
from fracou.covariance import OuModelSpec, gram_matrix, limit_variances
from fracou.cumulants import k2_exact
from fracou.errors import ParameterDomainError
from fracou.noise import NoiseSpec

SEED = 20261018


def half_config(M=100000, ns=(1024,)):
    return MonteCarloConfig(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.5)), M, SEED, list(ns))


# ---------------------------------------------------------------------------
# Exponent and DKW band
# ---------------------------------------------------------------------------

class TestExponent:
    @pytest.mark.parametrize("H,expected", [(0.1, -0.5), (0.5, -0.5), (0.625, -0.5),
                                            (0.7, -0.2), (0.74, -0.04)])
    def test_values(self, H, expected):
        assert theoretical_exponent(H) == pytest.approx(expected, abs=1e-15)

    def test_continuous_at_five_eighths(self):
        assert theoretical_exponent(0.625 + 1e-12) == pytest.approx(-0.5, abs=1e-10)

    @pytest.mark.parametrize("H", [0.0, 0.75, 0.9])
    def test_domain(self, H):
        with pytest.raises(ParameterDomainError):
            theoretical_exponent(H)

    def test_dkw(self):
        assert dkw_halfwidth(100000) == pytest.approx(0.005147, abs=1e-6)


# ---------------------------------------------------------------------------
# Kolmogorov distance
# ---------------------------------------------------------------------------

class TestKolmogorov:
    def test_single_zero(self):
        assert kolmogorov_vs_normal([0.0], 1.0).d_kol_hat == 0.5

    def test_far_tail(self):
        d = kolmogorov_vs_normal(np.full(10, 10.0), 1.0).d_kol_hat
        assert d == pytest.approx(1.0, abs=1e-15) and d <= 1.0

    def test_exact_normals_below_band(self):
        x = np.random.default_rng(SEED).standard_normal(100000)
        r = kolmogorov_vs_normal(x, 1.0)
        print(f"d={r.d_kol_hat:.5f} band={r.dkw_halfwidth:.5f}")
        assert r.d_kol_hat < r.dkw_halfwidth
        assert r.at_noise_floor

    def test_two_sided_jump(self):
        # two points at +-inf-like values: sup is reached just below the upper jump
        r = kolmogorov_vs_normal([-50.0, 50.0], 1.0)
        assert r.d_kol_hat == pytest.approx(0.5)

    def test_scale(self):
        x = np.random.default_rng(1).standard_normal(20000) * 3
        assert kolmogorov_vs_normal(x, 9.0).d_kol_hat < 0.015
        assert kolmogorov_vs_normal(x, 1.0).d_kol_hat > 0.2

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_bad_variance(self, bad):
        with pytest.raises(ParameterDomainError):
            kolmogorov_vs_normal([1.0], bad)

    def test_empty(self):
        with pytest.raises(ParameterDomainError):
            kolmogorov_vs_normal([], 1.0)


# ---------------------------------------------------------------------------
# Single experiments
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def half_1024():
    cfg = half_config()
    gram = gram_matrix(cfg.model.with_n(1024))
    return cfg, gram, estimator_draws(cfg, 1024, gram)


class TestExperiment:
    def test_level_at_1024(self, half_1024):
        cfg, gram, draws = half_1024
        s1 = limit_variances(cfg.model)[1]
        r = kolmogorov_vs_normal(draws, s1, 1024)
        print(f"d_Kol at n=1024: {r.d_kol_hat:.4f}")
        assert r.d_kol_hat < 0.05

    def test_prefix_determinism(self, half_1024):
        cfg, gram, draws = half_1024
        small = MonteCarloConfig(cfg.model, 5000, cfg.seed, cfg.ns)
        doubled = MonteCarloConfig(cfg.model, 10000, cfg.seed, cfg.ns)
        first = estimator_draws(small, 1024, gram)
        assert np.array_equal(estimator_draws(doubled, 1024, gram)[:5000], first)
        assert np.array_equal(draws[:5000], first)

    def test_experiment_is_distance_of_draws(self):
        cfg = half_config(M=3000, ns=(64,))
        s1 = limit_variances(cfg.model)[1]
        r = mc_experiment(cfg, 64)
        assert r.d_kol_hat == kolmogorov_vs_normal(estimator_draws(cfg, 64), s1).d_kol_hat
        assert r.n == 64 and r.sigma1_sq == s1

    def test_mean_matches_second_order_bias(self, half_1024):
        # E f(B_n) - theta ~ f'(a)(E B_n - a) + f''(a) Var(B_n) / 2
        cfg, gram, draws = half_1024
        n, H = 1024, 0.5
        a = limit_variances(cfg.model)[2]
        f1 = -1.0 / (2 * H) / a
        f2 = (1.0 / (2 * H)) * (1.0 / (2 * H) + 1.0) / a ** 2
        center = math.sqrt(n) * (f1 * (gram.mean_b_n() - a) + 0.5 * f2 * k2_exact(gram) / n)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        print(f"mean {draws.mean():.4f}, predicted {center:.4f}, s.e. {se:.4f}")
        assert abs(draws.mean() - center) < 5 * se

    @pytest.mark.xfail(strict=True, reason="the O(n^-1/2) bias is about 16 standard errors at "
                                           "n=1024 with 1e5 replicates; see the decisions ledger")
    def test_mean_within_five_se_of_zero(self, half_1024):
        cfg, gram, draws = half_1024
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean()) < 5 * se

    def test_substep_method(self):
        cfg = MonteCarloConfig(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.3)), 400, SEED, [16],
                               method="substep_euler", substeps=16)
        r = mc_experiment(cfg, 16)
        assert 0 <= r.d_kol_hat <= 1 and r.M == 400

    @pytest.mark.parametrize("kwargs", [dict(replicates=99), dict(ns=[8, 8]), dict(ns=[]),
                                        dict(method="euler")])
    def test_config_validation(self, kwargs):
        base = dict(model=OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.3)), replicates=100, seed=1, ns=[8, 16])
        base.update(kwargs)
        with pytest.raises(ParameterDomainError):
            MonteCarloConfig(**base)


# ---------------------------------------------------------------------------
# Rate verdicts
# ---------------------------------------------------------------------------

def _pt(n, d, M=100000):
    return KolmogorovReport(n, d, dkw_halfwidth(M), 1.0, M)


class TestJudge:
    def test_pass(self):
        pts = [_pt(n, 0.5 / math.sqrt(n)) for n in (128, 256, 512, 1024)]
        slope, thr, mono, excl, verdict = judge_rate(pts, -0.5)
        assert verdict == PASS and slope == pytest.approx(-0.5) and excl == []

    def test_fail_on_slope(self):
        pts = [_pt(n, 0.2 * n ** -0.2) for n in (128, 256, 512, 1024)]
        assert judge_rate(pts, -0.5)[4] == FAIL

    def test_fail_on_monotonicity(self):
        ds = [0.05, 0.02, 0.04, 0.01]
        pts = [_pt(n, d) for n, d in zip((128, 256, 512, 1024), ds)]
        slope, thr, mono, excl, verdict = judge_rate(pts, -0.5)
        assert not mono and verdict == FAIL

    def test_noise_floor_inconclusive(self):
        pts = [_pt(n, d) for n, d in zip((128, 256, 512, 1024), (0.05, 0.03, 0.005, 0.004))]
        slope, thr, mono, excl, verdict = judge_rate(pts, -0.5)
        assert excl == [512, 1024] and verdict == INCONCLUSIVE and math.isnan(slope)

    def test_sweep_shape_checked(self):
        cfg = MonteCarloConfig(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.3)), 100, 1, [8, 16, 32])
        with pytest.raises(ParameterDomainError):
            rate_sweep(cfg)
        cfg = MonteCarloConfig(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.3)), 100, 1, [8, 10, 12, 16])
        with pytest.raises(ParameterDomainError):
            rate_sweep(cfg)

    def test_small_sweep_runs(self):
        cfg = MonteCarloConfig(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.5)), 2000, SEED, [8, 16, 32, 64])
        rep = rate_sweep(cfg)
        assert len(rep.points) == 4 and rep.verdict in (PASS, FAIL, INCONCLUSIVE)
        assert all(0 <= p.d_kol_hat <= 1 for p in rep.points)
        again = rate_sweep(MonteCarloConfig(cfg.model, 2000, SEED, [8, 16, 32, 64], workers=2))
        assert again.to_dict() == rep.to_dict()


# ---------------------------------------------------------------------------
# Bound audits
# ---------------------------------------------------------------------------

class TestAudits:
    @pytest.mark.parametrize("name", AUDIT_NAMES)
    def test_default_configuration_passes(self, name):
        rep = bound_audit(name)
        print(f"{name}: sup {rep.inner_sup_ratio:.5f} -> {rep.sup_ratio:.5f}")
        assert rep.passed and math.isfinite(rep.sup_ratio)

    @pytest.mark.parametrize("beta", [-0.4, 0.0, 0.4])
    def test_a1_quadrature(self, beta):
        for t in (0.01, 1.0, 30.0):
            assert a1_integral(t, 1.0, beta) == pytest.approx(a1_closed(t, 1.0, beta), rel=1e-12)

    def test_a2_at_zero_beta(self):
        assert a2_integral(2.0, 1.0, 0.0) == pytest.approx(1 - math.exp(-2.0), rel=1e-13)

    def test_detects_growth(self):
        # A2(t) t^-beta tends to 1/theta; cutting the inner extent at t=1 leaves room to grow
        rep = bound_audit("appendix3", model=OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.7)),
                          extents=(1.0, 100.0))
        print(f"appendix3 at H=0.7: {rep.inner_sup_ratio:.4f} -> {rep.sup_ratio:.4f}")
        assert not rep.passed and rep.diverging

    def test_fbm_rejected_for_comparisons(self):
        with pytest.raises(ParameterDomainError):
            bound_audit("eq68", model=OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.6)))

    def test_unknown(self):
        with pytest.raises(ParameterDomainError):
            bound_audit("eq99")

    def test_bad_extents(self):
        with pytest.raises(ParameterDomainError):
            bound_audit("ap1", extents=(100.0, 50.0))
