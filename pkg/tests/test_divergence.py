"""Tests for closed-form and quadrature Renyi divergence machinery."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rppcal import (
    ConvergenceError,
    DomainError,
    GaussianPair,
    GaussianPrior,
    GmmPrior,
    ParamError,
    PrivacyTarget,
    kl_limit_check,
    privacy_loss,
    quadrature_divergence,
    renyi_gaussian,
)

from generators import random_valid_pair
from oracles import scipy_renyi

SEED = 20240817

# Frozen by an independent scipy.integrate.quad run over the log-domain
# integrand (reported abserr below 5e-13 for both).
QUAD_ORDER3_STD_VS_WIDE = 0.17328679513998652
QUAD_ORDER2_BIMODAL_VS_STD = 3.3071882258129506


class TestTypes:
    def test_prior_rejects_bad_variance(self):
        with pytest.raises(ParamError):
            GaussianPrior(0.0, 0.0)
        with pytest.raises(ParamError):
            GaussianPrior(0.0, -1.0)
        with pytest.raises(ParamError):
            GaussianPrior(0.0, math.nan)
        with pytest.raises(ParamError):
            GaussianPrior(math.inf, 1.0)

    def test_target_rejects_bad_parameters(self):
        with pytest.raises(ParamError):
            PrivacyTarget(alpha=1.0, epsilon=0.5)
        with pytest.raises(ParamError):
            PrivacyTarget(alpha=2.0, epsilon=0.0)
        with pytest.raises(ParamError):
            PrivacyTarget(alpha=2.0, epsilon=0.5, tol=0.0)

    def test_target_default_tolerance(self):
        assert PrivacyTarget(alpha=2.0, epsilon=0.5).tol == 1e-9

    def test_pair_derived_gaps(self):
        pair = GaussianPair(GaussianPrior(3.0, 2.0), GaussianPrior(1.0, 5.0))
        assert pair.mean_gap_sq == 4.0
        assert pair.var_gap == 3.0
        assert pair.combined_variance(2.0) == (1.0 - 2.0) * 2.0 + 2.0 * 5.0


class TestRenyiGaussian:
    def test_identical_priors_give_zero(self):
        assert renyi_gaussian(2.0, GaussianPrior(0, 1), GaussianPrior(0, 1)) == 0.0
        assert renyi_gaussian(7.3, GaussianPrior(-4, 2.5), GaussianPrior(-4, 2.5)) == 0.0

    def test_equal_variance_mean_shift(self):
        d = renyi_gaussian(2.0, GaussianPrior(1, 1), GaussianPrior(0, 1))
        assert_allclose(d, 1.0, rtol=1e-12)
        assert_allclose(d, scipy_renyi(2.0, [(1, 1, 1)], [(1, 0, 1)]), atol=1e-10)

    def test_variance_shift_against_frozen_quadrature(self):
        d = renyi_gaussian(3.0, GaussianPrior(0, 1), GaussianPrior(0, 2))
        assert_allclose(d, QUAD_ORDER3_STD_VS_WIDE, rtol=0, atol=1e-8)
        assert_allclose(d, math.log(2.0) / 4.0, rtol=1e-12)

    def test_undefined_when_combined_variance_nonpositive(self):
        with pytest.raises(DomainError):
            renyi_gaussian(3.0, GaussianPrior(0, 4), GaussianPrior(0, 1))

    def test_rejects_low_order(self):
        for alpha in (1.0, 0.5, -2.0):
            with pytest.raises(ParamError):
                renyi_gaussian(alpha, GaussianPrior(1, 1), GaussianPrior(0, 1))

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(SEED)
        for _ in range(10_000):
            alpha, pair = random_valid_pair(rng)
            d = renyi_gaussian(alpha, pair.p, pair.q)
            assert d >= 0.0
            if abs(pair.p.mu - pair.q.mu) > 1e-6 or abs(pair.var_gap) > 1e-6:
                assert d > 0.0

    def test_nondecreasing_in_order(self):
        rng = np.random.default_rng(SEED + 1)
        for _ in range(300):
            p = GaussianPrior(rng.uniform(-5, 5), rng.uniform(0.1, 10))
            q = GaussianPrior(rng.uniform(-5, 5), rng.uniform(0.1, 10))
            cap = 10.0 if q.var >= p.var else min(10.0, p.var / (p.var - q.var))
            grid = 1.0 + np.linspace(0.1, 0.9, 9) * (cap - 1.0)
            values = [renyi_gaussian(a, p, q) for a in grid]
            diffs = np.diff(values)
            assert np.all(diffs >= -1e-12 * np.maximum(1.0, np.abs(values[1:])))


class TestPrivacyLoss:
    def test_zero_noise_matches_prior_divergence(self):
        pair = GaussianPair(GaussianPrior(1, 1), GaussianPrior(0, 1))
        assert_allclose(privacy_loss(0.0, 2.0, pair), 1.0, rtol=1e-12)

    def test_unit_noise_halves_equal_variance_loss(self):
        pair = GaussianPair(GaussianPrior(1, 1), GaussianPrior(0, 1))
        assert_allclose(privacy_loss(1.0, 2.0, pair), 0.5, rtol=1e-12)
        assert_allclose(
            privacy_loss(1.0, 2.0, pair),
            scipy_renyi(2.0, [(1, 1, 2)], [(1, 0, 2)]),
            atol=1e-10,
        )

    def test_huge_noise_drives_loss_to_zero(self):
        pair = GaussianPair(GaussianPrior(1, 1), GaussianPrior(0, 3))
        assert privacy_loss(1e12, 2.0, pair) <= 1e-6

    def test_matches_direct_formula(self):
        # The same expression written out longhand, evaluated independently
        # of the noised-prior delegation path.
        def direct(theta_sq, alpha, pair):
            shifted = theta_sq + pair.combined_variance(alpha)
            mean_term = alpha * pair.mean_gap_sq / (2.0 * shifted)
            log_term = (
                math.log(shifted)
                - (1.0 - alpha) * math.log(pair.p.var + theta_sq)
                - alpha * math.log(pair.q.var + theta_sq)
            ) / (2.0 * (1.0 - alpha))
            return mean_term + log_term

        rng = np.random.default_rng(SEED + 2)
        for _ in range(2_000):
            alpha, pair = random_valid_pair(rng)
            theta_sq = rng.uniform(0, 5)
            assert_allclose(
                privacy_loss(theta_sq, alpha, pair),
                direct(theta_sq, alpha, pair),
                rtol=1e-12,
                atol=1e-300,
            )

    def test_nonincreasing_in_noise(self):
        rng = np.random.default_rng(SEED + 3)
        for _ in range(2_000):
            alpha, pair = random_valid_pair(rng)
            z1, z2 = sorted(rng.uniform(0, 20, size=2))
            g1 = privacy_loss(z1, alpha, pair)
            g2 = privacy_loss(z2, alpha, pair)
            assert g2 <= g1 + 1e-12 * max(1.0, g1)

    def test_rejects_negative_noise(self):
        pair = GaussianPair(GaussianPrior(1, 1), GaussianPrior(0, 1))
        with pytest.raises(ParamError):
            privacy_loss(-0.5, 2.0, pair)

    def test_undefined_below_domain_floor(self):
        pair = GaussianPair(GaussianPrior(0, 4), GaussianPrior(0, 1))
        with pytest.raises(DomainError):
            privacy_loss(2.0, 3.0, pair)


class TestQuadratureDivergence:
    def test_identical_gaussians(self):
        d = quadrature_divergence(2.0, GaussianPrior(0, 1), GaussianPrior(0, 1))
        assert abs(d) <= 1e-9

    def test_agrees_with_closed_form(self):
        d = quadrature_divergence(2.0, GaussianPrior(1, 1), GaussianPrior(0, 1))
        assert_allclose(d, 1.0, rtol=0, atol=1e-8)

    def test_bimodal_numerator_against_frozen_value(self):
        p = GmmPrior(((0.5, -2.0, 1.0), (0.5, 2.0, 1.0)))
        q = GaussianPrior(0, 1)
        d = quadrature_divergence(2.0, p, q)
        assert_allclose(d, QUAD_ORDER2_BIMODAL_VS_STD, rtol=0, atol=1e-8)
        loose = quadrature_divergence(2.0, p, q, rtol=1e-8)
        assert abs(d - loose) <= 1e-7

    def test_agreement_on_random_pairs(self):
        rng = np.random.default_rng(SEED + 4)
        for _ in range(300):
            alpha, pair = random_valid_pair(rng)
            closed = renyi_gaussian(alpha, pair.p, pair.q)
            numeric = quadrature_divergence(alpha, pair.p, pair.q)
            assert abs(closed - numeric) <= 1e-7

    def test_divergent_integral_raises(self):
        with pytest.raises(ConvergenceError):
            quadrature_divergence(2.0, GaussianPrior(0, 4), GaussianPrior(0, 1))

    def test_rejects_low_order(self):
        with pytest.raises(ParamError):
            quadrature_divergence(1.0, GaussianPrior(0, 1), GaussianPrior(1, 1))


class TestKlLimitCheck:
    def test_identical_priors(self):
        assert kl_limit_check(GaussianPrior(0, 1), GaussianPrior(0, 1)) == 0.0

    def test_mean_shift_matches_gaussian_kl(self):
        assert_allclose(kl_limit_check(GaussianPrior(1, 1), GaussianPrior(0, 1)), 0.5, atol=1e-4)

    def test_variance_shift_matches_gaussian_kl(self):
        kl = 0.5 * (2.0 / 1.0 - 1.0 + math.log(1.0 / 2.0))
        assert_allclose(kl_limit_check(GaussianPrior(0, 2), GaussianPrior(0, 1)), kl, atol=1e-4)
