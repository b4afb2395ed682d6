"""Tests for dataset ingestion, query priors, and the quantile baseline."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rppcal import (
    EmptyData,
    EmptySecret,
    FileError,
    GaussianPair,
    ParamError,
    PrivacyTarget,
    CalibrationMethod,
    Scenario,
    SchemaError,
    TooFewSamples,
    calibrate_exact,
    clamped_mean_prior,
    load_scenario,
    mean_query_prior,
    raw_query_prior,
    winf_baseline_theta,
    winf_distance,
)

SEED = 55708


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return Scenario(str(path), "released", "secret", "a", "b")


class TestScenario:
    def test_rejects_equal_secrets(self):
        with pytest.raises(ParamError):
            Scenario("x.csv", "v", "s", "same", "same")

    def test_rejects_equal_secrets_after_trim(self):
        with pytest.raises(ParamError):
            Scenario("x.csv", "v", "s", "same", "  same ")


class TestLoadScenario:
    def test_splits_by_secret_in_row_order(self, tmp_path):
        scenario = write_csv(
            tmp_path / "toy.csv",
            "released,secret\n1.5,a\n-2.0,b\n3.25,a\n",
        )
        data = load_scenario(scenario)
        assert list(data.samples_i) == [1.5, 3.25]
        assert list(data.samples_j) == [-2.0]
        assert data.dropped_rows == 0

    def test_missing_released_value_is_dropped_and_counted(self, tmp_path):
        scenario = write_csv(
            tmp_path / "gap.csv",
            "released,secret\n1.5,a\n,a\n2.5,b\n",
        )
        data = load_scenario(scenario)
        assert list(data.samples_i) == [1.5]
        assert data.dropped_rows == 1

    def test_missing_secret_value_is_dropped_and_counted(self, tmp_path):
        scenario = write_csv(
            tmp_path / "gap2.csv",
            "released,secret\n1.5,a\n7.0,\n2.5,b\n",
        )
        data = load_scenario(scenario)
        assert data.dropped_rows == 1
        assert list(data.samples_i) == [1.5]
        assert list(data.samples_j) == [2.5]

    def test_absent_secret_raises(self, tmp_path):
        scenario = write_csv(tmp_path / "one.csv", "released,secret\n1.5,a\n2.0,a\n")
        with pytest.raises(EmptySecret):
            load_scenario(scenario)

    def test_missing_column_names_it(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("value,secret\n1.5,a\n2.0,b\n", encoding="utf-8")
        scenario = Scenario(str(path), "released", "secret", "a", "b")
        with pytest.raises(SchemaError, match="released"):
            load_scenario(scenario)

    def test_non_numeric_release_raises(self, tmp_path):
        scenario = write_csv(tmp_path / "bad.csv", "released,secret\noops,a\n2.0,b\n")
        with pytest.raises(SchemaError):
            load_scenario(scenario)

    def test_missing_file(self):
        scenario = Scenario("/no/such/file.csv", "released", "secret", "a", "b")
        with pytest.raises(FileError):
            load_scenario(scenario)

    def test_secret_match_trims_whitespace(self, tmp_path):
        scenario = write_csv(
            tmp_path / "trim.csv",
            'released,secret\n1.5, a \n"2.0",b\n',
        )
        data = load_scenario(scenario)
        assert list(data.samples_i) == [1.5]
        assert list(data.samples_j) == [2.0]

    def test_deterministic(self, tmp_path):
        scenario = write_csv(
            tmp_path / "rep.csv",
            "released,secret\n1.5,a\n-2.0,b\n3.25,a\n0.5,b\n",
        )
        assert load_scenario(scenario) == load_scenario(scenario)


class TestMeanQueryPrior:
    def test_two_point_example(self):
        prior = mean_query_prior([0.0, 2.0])
        assert prior.mu == 1.0
        assert prior.var == 1.0

    def test_constant_samples_rejected(self):
        with pytest.raises(ParamError):
            mean_query_prior([3.0, 3.0, 3.0])

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            mean_query_prior([3.0])
        with pytest.raises(TooFewSamples):
            mean_query_prior([])

    def test_sampling_oracle(self):
        rng = np.random.default_rng(SEED)
        samples = rng.normal(5.0, 2.0, size=10_000)
        prior = mean_query_prior(samples)
        assert abs(prior.mu - 5.0) <= 3.0 * 2.0 / 100.0
        assert abs(prior.var - 4e-4) <= 0.2 * 4e-4

    def test_duplication_scaling(self):
        # With the n-1 variance estimate, duplicating every sample scales
        # the prior variance by exactly (n - 1) / (2n - 1), which approaches
        # the idealized halving from below as n grows.
        rng = np.random.default_rng(SEED + 1)
        samples = rng.normal(0.0, 1.0, size=400)
        once = mean_query_prior(samples)
        twice = mean_query_prior(np.concatenate([samples, samples]))
        n = samples.size
        assert_allclose(twice.var, once.var * (n - 1) / (2 * n - 1), rtol=1e-12)
        big = rng.normal(0.0, 1.0, size=50_000)
        ratio = mean_query_prior(np.concatenate([big, big])).var / mean_query_prior(big).var
        assert abs(ratio - 0.5) <= 1e-4


class TestClampedMeanPrior:
    def test_constant_samples_get_the_floor(self):
        prior = clamped_mean_prior([3.0, 3.0, 3.0])
        assert prior.mu == 3.0
        assert prior.var == 1e-6

    def test_matches_unclamped_on_regular_data(self):
        rng = np.random.default_rng(SEED + 2)
        samples = rng.normal(1.0, 2.0, size=300)
        assert clamped_mean_prior(samples) == mean_query_prior(samples)


class TestRawQueryPrior:
    def test_unimodal_selects_single_component(self):
        rng = np.random.default_rng(SEED + 3)
        prior = raw_query_prior(rng.normal(2.0, 1.0, size=1_000), k_max=5, seed=0)
        assert prior.k == 1

    def test_bimodal_selects_two_components(self):
        rng = np.random.default_rng(SEED + 4)
        samples = np.concatenate([rng.normal(-5, 1, 800), rng.normal(5, 1, 800)])
        prior = raw_query_prior(samples, k_max=5, seed=0)
        assert prior.k == 2


class TestWinfBaseline:
    def test_identical_lists(self):
        samples = [1.0, 2.0, 3.0]
        assert winf_distance(samples, samples) == 0.0
        result = winf_baseline_theta(samples, samples, PrivacyTarget(alpha=2.0, epsilon=0.5))
        assert result.theta_sq == 0.0
        assert result.method is CalibrationMethod.WINF_BASELINE
        assert result.achieved_divergence == 0.0

    def test_pure_shift(self):
        rng = np.random.default_rng(SEED + 5)
        samples = rng.normal(0.0, 1.0, size=500)
        shifted = samples + 3.0
        assert_allclose(winf_distance(samples, shifted), 3.0, rtol=1e-12)
        target = PrivacyTarget(alpha=4.0, epsilon=0.25)
        result = winf_baseline_theta(samples, shifted, target)
        assert_allclose(result.theta_sq, 4.0 * 9.0 / (2.0 * 0.25), rtol=1e-12)
        assert result.achieved_divergence <= target.epsilon + 1e-12

    def test_translation_covariance(self):
        rng = np.random.default_rng(SEED + 6)
        a = list(rng.normal(0, 2, size=120))
        b = list(rng.normal(1, 1, size=80))
        target = PrivacyTarget(alpha=3.0, epsilon=0.4)
        base = winf_baseline_theta(a, b, target).theta_sq
        moved = winf_baseline_theta([x + 17.0 for x in a], [x + 17.0 for x in b], target).theta_sq
        assert_allclose(moved, base, rtol=1e-9)

    def test_quantile_alignment_on_unequal_sizes(self):
        a = [0.0, 10.0]
        b = [0.0, 1.0, 2.0, 10.0]
        # Four midpoint levels against the sorted two-point list: ranks
        # resolve to [0, 0, 1, 1] on the short side.
        expected = max(abs(0.0 - 0.0), abs(0.0 - 1.0), abs(10.0 - 2.0), abs(10.0 - 10.0))
        assert_allclose(winf_distance(a, b), expected, rtol=1e-15)

    def test_never_below_exact_mean_query_noise(self):
        rng = np.random.default_rng(SEED + 7)
        for _ in range(25):
            shift = rng.uniform(0.5, 4.0)
            samples = rng.normal(0.0, 1.0, size=200)
            shifted = samples + shift
            target = PrivacyTarget(alpha=float(rng.uniform(1.5, 6)), epsilon=float(rng.uniform(0.1, 1)))
            pair = GaussianPair(mean_query_prior(samples), mean_query_prior(shifted))
            ours = calibrate_exact(pair, target)
            baseline = winf_baseline_theta(samples, shifted, target)
            assert ours.theta_sq <= baseline.theta_sq

    def test_empty_lists_rejected(self):
        with pytest.raises(EmptyData):
            winf_distance([], [1.0])
        with pytest.raises(EmptyData):
            winf_baseline_theta([1.0], [], PrivacyTarget(alpha=2.0, epsilon=0.5))
