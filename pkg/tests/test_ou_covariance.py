"""Tests for the OU covariance layer.

Closed forms at H = 1/2 anchor everything; the general-H Gram is checked
against nested quadrature of the integration-by-parts representation and
against the stationary covariance.
"""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma

from fracou.covariance import (GramMatrix, OuModelSpec, closed_form_half, gram_matrix,
                               limit_variances, ou_cov, sigma_b_sq, sigma_b_sq_report,
                               stationary_asymptotic, stationary_cov, stationary_variance)
from fracou.errors import NotPositiveDefiniteError, ParameterDomainError
from fracou.noise import NoiseSpec, kernel_cov


def ibp_oracle(noise, theta, s, t):
    """Nested adaptive quadrature of the integration-by-parts formula."""
    R = lambda u, v: float(kernel_cov(noise, u, v))
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    i1 = integrate.quad(lambda v: math.exp(-theta * (s - v)) * R(t, v), 0, s, points=[min(s, t)], **opts)[0]
    i2 = integrate.quad(lambda u: math.exp(-theta * (t - u)) * R(u, s), 0, t, points=[min(s, t)], **opts)[0]
    i3 = integrate.dblquad(lambda v, u: math.exp(-theta * (t - u) - theta * (s - v)) * R(u, v),
                           0, t, 0, s, epsabs=1e-13, epsrel=1e-12)[0]
    return R(t, s) - theta * i1 - theta * i2 + theta ** 2 * i3


# ---------------------------------------------------------------------------
# Model validation
# ---------------------------------------------------------------------------

class TestModelSpec:
    @pytest.mark.parametrize("theta,h,n", [(0.0, 1.0, 4), (-1.0, 1.0, 4), (1.0, 0.0, 4),
                                           (1.0, 1.0, 0), (1.0, 1.0, 2.5), (float("nan"), 1.0, 3)])
    def test_rejects_bad_parameters(self, theta, h, n):
        with pytest.raises(ParameterDomainError):
            OuModelSpec(theta, h, n, NoiseSpec.fbm(0.5))

    def test_rate_regime(self):
        OuModelSpec(1.0, 1.0, 4, NoiseSpec.fbm(0.7)).require_rate_regime()
        with pytest.raises(ParameterDomainError):
            OuModelSpec(1.0, 1.0, 4, NoiseSpec.fbm(0.8)).require_rate_regime()

    @pytest.mark.parametrize("H,theta,expected", [(0.5, 2.0, 0.25), (0.5, 1.0, 0.5)])
    def test_stationary_variance(self, H, theta, expected):
        assert stationary_variance(theta, H) == pytest.approx(expected, rel=1e-15)


# ---------------------------------------------------------------------------
# Pointwise covariance
# ---------------------------------------------------------------------------

class TestOuCov:
    @pytest.mark.parametrize("s,t,expected", [(1.0, 1.0, 0.432332), (1.0, 2.0, 0.159046)])
    def test_brownian_examples(self, s, t, expected):
        model = OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.5))
        val = ou_cov(model, s, t)
        print(f"rho({t},{s}) = {val:.12f}")
        assert abs(val - float(closed_form_half(1.0, s, t))) < 1e-12
        assert abs(val - expected) < 1e-6

    @pytest.mark.parametrize("noise", [NoiseSpec.fbm(0.3), NoiseSpec.sub_fbm(0.7), NoiseSpec.bi_fbm(0.6, 0.5)],
                             ids=["fbm0.3", "sub0.7", "bi"])
    def test_origin(self, noise):
        model = OuModelSpec(1.0, 1.0, 1, noise)
        assert ou_cov(model, 0.0, 3.0) == 0.0
        assert ou_cov(model, 0.0, 0.0) == 0.0

    @pytest.mark.parametrize("noise,theta,s,t", [
        pytest.param(NoiseSpec.fbm(0.3), 1.0, 1.0, 2.0, marks=pytest.mark.slow),
        (NoiseSpec.fbm(0.7), 0.5, 1.5, 1.5),
        pytest.param(NoiseSpec.sub_fbm(0.3), 1.0, 0.7, 2.2, marks=pytest.mark.slow),
        (NoiseSpec.bi_fbm(0.75, 0.8), 2.0, 1.0, 3.0),
    ], ids=["fbm0.3", "fbm0.7-diag", "sub0.3", "bi"])
    def test_matches_nested_quadrature(self, noise, theta, s, t):
        model = OuModelSpec(theta, 1.0, 1, noise)
        got = ou_cov(model, s, t)
        ref = ibp_oracle(noise, theta, s, t)
        print(f"ou_cov={got:.15f} oracle={ref:.15f}")
        assert abs(got - ref) <= 1e-9 * abs(ref)

    def test_symmetric(self):
        model = OuModelSpec(1.0, 1.0, 1, NoiseSpec.sub_fbm(0.4))
        assert ou_cov(model, 1.3, 4.1) == pytest.approx(ou_cov(model, 4.1, 1.3), rel=1e-12)

    def test_negative_time(self):
        with pytest.raises(ParameterDomainError):
            ou_cov(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.3)), -1.0, 1.0)


# ---------------------------------------------------------------------------
# Gram matrix
# ---------------------------------------------------------------------------

class TestGramMatrix:
    def test_closed_form_n3(self):
        model = OuModelSpec(1.0, 1.0, 3, NoiseSpec.fbm(0.5))
        quad = gram_matrix(model, method="quadrature")
        tt = np.arange(1, 4.0)
        exact = closed_form_half(1.0, tt[:, None], tt[None, :])
        err = np.max(np.abs(quad.entries - exact))
        print(f"max entry error at H=1/2: {err:.2e}")
        assert err < 1e-9
        assert gram_matrix(model).method == "closed_form_H_half"

    @pytest.mark.parametrize("noise", [NoiseSpec.fbm(0.3), NoiseSpec.sub_fbm(0.6), NoiseSpec.sub_bi_fbm(0.6, 0.5)],
                             ids=["fbm", "sub", "subbi"])
    def test_n1_is_variance(self, noise):
        model = OuModelSpec(1.0, 1.0, 1, noise)
        g = gram_matrix(model)
        assert g.entries.shape == (1, 1)
        assert g.entries[0, 0] > 0
        assert g.entries[0, 0] == pytest.approx(ou_cov(model, 1.0, 1.0), rel=1e-10)

    @pytest.mark.parametrize("noise", [NoiseSpec.fbm(0.3), NoiseSpec.fbm(0.7), NoiseSpec.sub_fbm(0.3),
                                       NoiseSpec.bi_fbm(0.6, 0.5)], ids=["fbm0.3", "fbm0.7", "sub0.3", "bi"])
    def test_entries_match_ou_cov(self, noise):
        model = OuModelSpec(0.8, 0.5, 12, noise)
        g = gram_matrix(model)
        for j, l in [(1, 1), (3, 7), (12, 12), (5, 12), (11, 2)]:
            ref = ou_cov(model, j * 0.5, l * 0.5)
            assert abs(g.entries[j - 1, l - 1] - ref) <= 1e-9 * abs(ref) + 1e-14

    @pytest.mark.parametrize("noise", [NoiseSpec.fbm(0.3), NoiseSpec.sub_fbm(0.6)], ids=["fbm", "sub"])
    def test_invariants(self, noise):
        g = gram_matrix(OuModelSpec(1.0, 1.0, 64, noise))
        G = g.entries
        assert np.array_equal(G, G.T)
        assert np.all(np.diag(G) > 0)
        assert g.compute_min_eigenvalue() >= -1e-8 * g.scale()

    def test_leading_block(self):
        model = OuModelSpec(1.0, 1.0, 40, NoiseSpec.fbm(0.3))
        big = gram_matrix(model)
        small = gram_matrix(model.with_n(10))
        assert np.max(np.abs(big.leading(10).entries - small.entries)) < 1e-13

    def test_indefinite_rejected(self):
        model = OuModelSpec(1.0, 1.0, 2, NoiseSpec.fbm(0.5))
        bad = GramMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]), model, "quadrature")
        with pytest.raises(NotPositiveDefiniteError):
            bad.factor()

    def test_tiny_negative_eigenvalue_jittered_once(self):
        model = OuModelSpec(1.0, 1.0, 2, NoiseSpec.fbm(0.5))
        G = np.array([[1.0, 1.0], [1.0, 1.0]]) - 1e-12 * np.eye(2)
        g = GramMatrix(G, model, "quadrature")
        g.factor()
        assert g.jitter == pytest.approx(1e-10 * g.scale())

    def test_horizon_cap(self):
        with pytest.raises(ParameterDomainError):
            gram_matrix(OuModelSpec(1.0, 1000.0, 2000, NoiseSpec.fbm(0.3)))


# ---------------------------------------------------------------------------
# Stationary covariance and series
# ---------------------------------------------------------------------------

class TestStationary:
    def test_brownian_closed_form(self):
        sc = stationary_cov(1.0, 1.0, 0.5, 20)
        k = np.arange(21)
        assert np.max(np.abs(sc.values - 0.5 * np.exp(-k))) < 1e-12

    @pytest.mark.parametrize("H", [0.05, 0.3, 0.7, 0.74])
    @pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
    def test_lag_zero_is_a(self, H, theta):
        sc = stationary_cov(theta, 1.0, H, 4)
        a = H * gamma(2 * H) * theta ** (-2 * H)
        assert abs(sc.values[0] - a) < 1e-11 * max(1.0, a)

    def test_large_lag_constant(self):
        H = 0.7
        sc = stationary_cov(1.0, 1.0, H, 400)
        k = np.array([50, 100, 200, 400])
        prod = np.abs(sc.values[k]) * k ** (2 - 2 * H)
        print("rho_0(k) k^(2-2H):", prod)
        assert np.all(np.diff(np.abs(np.diff(prod))) <= 0)
        assert abs(prod[-1] - prod[-2]) < 1e-3 * prod[-1]
        assert np.max(np.abs(sc.values[k] - stationary_asymptotic(1.0, H, k * 1.0))) < 1e-8

    @pytest.mark.parametrize("H", [0.3, 0.6])
    def test_gram_near_stationary(self, H):
        # |rho(jh,lh) - rho_0| <= C [e^{-(t+s)} + e^{-t}(1+s)^{2H-2} + e^{-s}(1+t)^{2H-2}]
        n = 64
        g = gram_matrix(OuModelSpec(1.0, 1.0, n, NoiseSpec.fbm(H))).entries
        rho0 = stationary_cov(1.0, 1.0, H, n).values
        t = np.arange(1, n + 1.0)
        T, S = np.meshgrid(t, t, indexing="ij")
        diff = np.abs(g - rho0[np.abs(T - S).astype(int)])
        maj = (np.exp(-(T + S)) + np.exp(-T) * (1 + S) ** (2 * H - 2) + np.exp(-S) * (1 + T) ** (2 * H - 2))
        # far from the origin both sides sink below double-precision roundoff
        usable = maj > 1e-9
        inner = usable & (T <= 16) & (S <= 16)
        c_fit = np.max(diff[inner] / maj[inner])
        c_all = np.max(diff[usable] / maj[usable])
        print(f"H={H}: C fitted on 16x16 = {c_fit:.4f}, over 64x64 = {c_all:.4f}")
        assert c_all <= c_fit * (1 + 1e-9)

    @pytest.mark.parametrize("theta,expected", [(1.0, 0.5 / math.tanh(1.0)), (2.0, 1.0 / (8 * math.tanh(2.0)))])
    def test_sigma_b_sq_brownian(self, theta, expected):
        val = sigma_b_sq(theta, 1.0, 0.5)
        print(f"theta={theta}: sigma_B^2 = {val:.15f}")
        assert abs(val - expected) < 1e-10

    @pytest.mark.parametrize("H", [0.3, 0.6, 0.7])
    def test_sigma_b_sq_tolerance_consistency(self, H):
        loose = sigma_b_sq_report(1.0, 1.0, H, tol=1e-6)
        tight = sigma_b_sq_report(1.0, 1.0, H, tol=1e-10)
        print(f"H={H}: K {loose.terms}->{tight.terms}, values {loose.value:.12f} {tight.value:.12f}")
        assert abs(loose.value - tight.value) < 1e-6
        assert tight.error_bound < 1e-10

    def test_sigma_b_sq_matches_direct_sum(self):
        # brute-force 2 sum rho_0^2 with a huge cut, tail from the envelope
        H = 0.3
        sc = stationary_cov(1.0, 1.0, H, 20000)
        direct = 2 * (sc.values[0] ** 2 + 2 * np.sum(sc.values[1:] ** 2))
        val = sigma_b_sq(1.0, 1.0, H)
        assert abs(val - direct) < 1e-9

    @pytest.mark.parametrize("H", [0.75, 0.9])
    def test_sigma_b_sq_domain(self, H):
        with pytest.raises(ParameterDomainError):
            sigma_b_sq(1.0, 1.0, H)


class TestLimitVariances:
    def test_brownian(self):
        sb, s1, a = limit_variances(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.5)))
        assert a == 0.5
        assert abs(s1 - 0.5 / math.tanh(1.0) / 0.25) < 1e-9
        print(f"sigma_1^2 = {s1:.10f}")

    def test_a_at_theta_two(self):
        assert limit_variances(OuModelSpec(2.0, 1.0, 1, NoiseSpec.fbm(0.5)))[2] == 0.25

    def test_scaling_at_half(self):
        # theta -> c theta with h -> h / c leaves theta h fixed: sigma_B^2 scales by c^-2,
        # a by c^-1, so sigma_1^2 / theta^2 is unchanged
        c = 3.0
        sb1, s11, a1 = limit_variances(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.5)))
        sb2, s12, a2 = limit_variances(OuModelSpec(c, 1.0 / c, 1, NoiseSpec.fbm(0.5)))
        assert sb2 == pytest.approx(sb1 / c ** 2, rel=1e-10)
        assert a2 == pytest.approx(a1 / c, rel=1e-14)
        assert s12 / c ** 2 == pytest.approx(s11, rel=1e-10)

    def test_general_noise_uses_effective_hurst(self):
        sub = limit_variances(OuModelSpec(1.0, 1.0, 1, NoiseSpec.sub_fbm(0.3)))
        fbm = limit_variances(OuModelSpec(1.0, 1.0, 1, NoiseSpec.fbm(0.3)))
        assert sub == fbm
