"""Tests for path generation.

Exact Cholesky draws are checked against closed forms; the circulant fGn
driver and the substep recursion are checked against the Gram matrix.
"""

import math

import numpy as np
import pytest
from scipy import stats

from fracou.covariance import GramMatrix, OuModelSpec, closed_form_half, gram_matrix
from fracou.errors import ParameterDomainError
from fracou.estimator import b_n_rows
from fracou.noise import NoiseSpec
from fracou._kernels import ou_filter
from fracou.rng import SeedPlan, splitmix64
from fracou.sampler import (CHUNK, CirculantPlan, PathSample, cholesky_draws, cholesky_sample,
                            fgn_autocov, fgn_circulant, ou_path_substep, substep_draws)

SEED = 20261018


def cov_se(x, j, l):
    prod = x[:, j] * x[:, l]
    return prod.mean(), prod.std(ddof=1) / math.sqrt(x.shape[0])


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------

class TestSeedPlan:
    def test_distinct_derived_seeds(self):
        plan = SeedPlan(7, "x")
        seeds = {plan.derive(i) for i in range(100000)}
        assert len(seeds) == 100000

    def test_tags_separate_streams(self):
        a = SeedPlan(7, "a").generator(0).standard_normal(4)
        b = SeedPlan(7, "b").generator(0).standard_normal(4)
        assert not np.array_equal(a, b)

    def test_pure(self):
        assert SeedPlan(11).derive(5) == SeedPlan(11).derive(5)
        assert splitmix64(0) == 0xE220A8397B1DCDAF

    @pytest.mark.parametrize("seed", [-1, 2 ** 64, 1.5, "3"])
    def test_bad_seed(self, seed):
        with pytest.raises(ValueError):
            SeedPlan(seed)


# ---------------------------------------------------------------------------
# Exact sampling
# ---------------------------------------------------------------------------

class TestCholesky:
    def test_scalar_variance(self):
        model = OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.3))
        g = gram_matrix(model)
        v = g.entries[0, 0]
        x = cholesky_draws(g, SEED, 100000)[:, 0]
        var = float(np.mean(x ** 2))
        print(f"v={v:.6f} empirical={var:.6f}")
        assert abs(var - v) < 4 * v * math.sqrt(2 / 1e5)

    def test_lag_one_autocovariance(self):
        model = OuModelSpec(1.0, 1.0, 8, NoiseSpec.fbm(0.5))
        x = cholesky_draws(gram_matrix(model), SEED, 100000)
        m, se = cov_se(x, 0, 1)
        exact = float(closed_form_half(1.0, 1.0, 2.0))
        print(f"rho(h,2h): exact {exact:.6f}, MC {m:.6f} +- {se:.6f}")
        assert abs(m - exact) < 4 * se

    def test_same_seed_same_triples(self):
        g = gram_matrix(OuModelSpec(1.0, 1.0, 5, NoiseSpec.fbm(0.3)))
        a = cholesky_sample(g, 99, 3)
        b = cholesky_sample(g, 99, 3)
        for p, q in zip(a, b):
            assert np.array_equal(p.values, q.values)
            assert p.method == "cholesky_exact" and p.n == 5

    @pytest.mark.parametrize("workers", [2, 3])
    def test_worker_count_invariance(self, workers):
        g = gram_matrix(OuModelSpec(1.0, 1.0, 6, NoiseSpec.fbm(0.3)))
        count = 2 * CHUNK + 17
        a = cholesky_draws(g, SEED, count, workers=1)
        b = cholesky_draws(g, SEED, count, workers=workers)
        assert np.array_equal(a, b)

    def test_prefix_stable(self):
        g = gram_matrix(OuModelSpec(1.0, 1.0, 6, NoiseSpec.fbm(0.3)))
        big = cholesky_draws(g, SEED, 3000)
        small = cholesky_draws(g, SEED, 100)
        offset = cholesky_draws(g, SEED, 50, start=100)
        assert np.array_equal(big[:100], small)
        assert np.array_equal(big[100:150], offset)

    def test_jitter_recorded(self):
        model = OuModelSpec(1.0, 1.0, 2, NoiseSpec.fbm(0.5))
        g = GramMatrix(np.ones((2, 2)) - 1e-12 * np.eye(2), model, "quadrature")
        paths = cholesky_sample(g, 1, 2)
        assert paths[0].notes["jitter"] > 0

    def test_marginal_gaussian(self):
        model = OuModelSpec(1.0, 1.0, 16, NoiseSpec.fbm(0.7))
        g = gram_matrix(model)
        x = cholesky_draws(g, SEED, 100000)[:, -1] / math.sqrt(g.entries[-1, -1])
        p = stats.kstest(x, "norm").pvalue
        print(f"KS p-value {p:.3f}")
        assert p > 0.01

    def test_path_shape_checked(self):
        with pytest.raises(ParameterDomainError):
            PathSample(np.zeros(3), OuModelSpec(1.0, 1.0, 4, NoiseSpec.fbm(0.5)), 0, "cholesky_exact")


# ---------------------------------------------------------------------------
# Circulant fGn
# ---------------------------------------------------------------------------

class TestCirculant:
    def test_brownian_increments_uncorrelated(self):
        cp = CirculantPlan.build(0.5, 1.0, 64)
        x = cp.draw_rows(SeedPlan(SEED, "t"), 0, 20000)
        prod = x[:, :-1] * x[:, 1:]
        m, se = prod[:, 10].mean(), prod[:, 10].std(ddof=1) / math.sqrt(20000)
        assert abs(m) < 4 * se
        assert abs(x.var() - 1.0) < 0.01

    def test_gamma_one_at_07(self):
        cp = CirculantPlan.build(0.7, 1.0, 32)
        x = cp.draw_rows(SeedPlan(SEED, "t"), 0, 50000)
        prod = x[:, 5] * x[:, 6]
        m, se = prod.mean(), prod.std(ddof=1) / math.sqrt(prod.size)
        exact = 0.5 * (2 ** 1.4 - 2)
        print(f"gamma(1): exact {exact:.6f}, MC {m:.6f} +- {se:.6f}")
        assert abs(exact - 0.319508) < 1e-6
        assert abs(fgn_autocov(0.7, 1.0, 2)[1] - exact) < 1e-15
        assert abs(m - exact) < 4 * se

    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_self_similar_sum(self, H):
        n, h = 50, 0.2
        cp = CirculantPlan.build(H, h, n)
        s = cp.draw_rows(SeedPlan(SEED, "t"), 0, 40000).sum(axis=1)
        target = (n * h) ** (2 * H)
        se = target * math.sqrt(2 / s.size)
        assert abs(np.mean(s ** 2) - target) < 4 * se

    def test_single_draw_and_method(self):
        x, method = fgn_circulant(0.3, 1.0, 10, 5, return_method=True)
        assert x.shape == (10,) and method == "circulant"
        assert np.array_equal(x, fgn_circulant(0.3, 1.0, 10, 5))

    def test_toeplitz_fallback(self, monkeypatch):
        real_fft = np.fft.fft
        calls = {"n": 0}

        def broken(a, *args, **kwargs):
            calls["n"] += 1
            out = real_fft(a, *args, **kwargs)
            if calls["n"] == 1:
                out = out.copy()
                out[0] = -abs(out).max()
            return out

        monkeypatch.setattr(np.fft, "fft", broken)
        cp = CirculantPlan.build(0.3, 1.0, 8)
        monkeypatch.setattr(np.fft, "fft", real_fft)
        assert cp.method == "toeplitz_cholesky"
        assert cp.draw(np.random.default_rng(0)).shape == (8,)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 4), (1.0, 1.0, 4), (0.3, 0.0, 4), (0.3, 1.0, 0)])
    def test_bad_arguments(self, args):
        with pytest.raises(ParameterDomainError):
            CirculantPlan.build(*args)


# ---------------------------------------------------------------------------
# Substep recursion
# ---------------------------------------------------------------------------

class TestSubstep:
    def test_mean_b_n_at_half(self):
        model = OuModelSpec(1.0, 1.0, 32, NoiseSpec.fbm(0.5))
        b = substep_draws(model, 64, SEED, 20000, reducer=b_n_rows)
        exact = gram_matrix(model).mean_b_n()
        se = b.std(ddof=1) / math.sqrt(b.size)
        print(f"E B_n: exact {exact:.6f}, substep {b.mean():.6f} +- {se:.6f}")
        assert abs(b.mean() - exact) < 4 * se

    def test_empirical_gram(self):
        model = OuModelSpec(1.0, 1.0, 8, NoiseSpec.fbm(0.3))
        x = substep_draws(model, 128, SEED, 100000)
        G = gram_matrix(model).entries
        worst = 0.0
        for j in range(8):
            for l in range(j, 8):
                m, se = cov_se(x, j, l)
                slack = abs(m - G[j, l]) / max(4 * se, 2e-3)
                worst = max(worst, slack)
        print(f"worst entry error / allowance = {worst:.3f}")
        assert worst <= 1.0

    def test_single_path(self):
        model = OuModelSpec(1.0, 1.0, 5, NoiseSpec.fbm(0.3))
        p = ou_path_substep(model, 16, 3, index=2)
        again = substep_draws(model, 16, 3, 1, start=2)[0]
        assert np.array_equal(p.values, again)
        assert p.notes["fgn_method"] == "circulant"

    def test_general_noise_rejected(self):
        with pytest.raises(ParameterDomainError):
            ou_path_substep(OuModelSpec(1.0, 1.0, 5, NoiseSpec.sub_fbm(0.3)), 16, 3)

    def test_recursion_impulse_response(self):
        # one unit increment at fine step k reaches observation j with weight w q^(j m - 1 - k)
        m, decay, weight = 4, 0.9, 0.95
        inc = np.zeros((1, 3 * m))
        inc[0, 1] = 1.0
        out = ou_filter(inc, decay, weight, m)[0]
        expected = weight * decay ** (np.arange(1, 4) * m - 2)
        assert np.allclose(out, expected, rtol=1e-14, atol=0)

    @pytest.mark.parametrize("H", [0.3, 0.5, 0.7])
    def test_matches_cholesky_in_distribution(self, H):
        model = OuModelSpec(1.0, 1.0, 64, NoiseSpec.fbm(H))
        exact = cholesky_draws(gram_matrix(model), SEED, 10000, reducer=b_n_rows)
        approx = substep_draws(model, 128, SEED + 1, 10000, reducer=b_n_rows)
        res = stats.ks_2samp(exact, approx)
        print(f"H={H}: two-sample KS = {res.statistic:.4f}, p = {res.pvalue:.3f}")
        assert res.pvalue > 0.01
