"""Mixture-model fitting tests with naive-formula oracles."""

import math

import numpy as np
import pytest

from tactimap.gmm import (
    DegenerateDensityError,
    EmConfig,
    GmmModel,
    assign_hard,
    dedup_rows,
    fit_em,
    gaussian_logdensity,
    load_gmm,
    posteriors,
    responsibilities,
    save_gmm,
)


def naive_logdensity(x, mean, cov):
    """Textbook density via explicit determinant and inverse."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = mean.shape[0]
    diff = x - mean
    quad = diff @ np.linalg.inv(cov) @ diff
    return -0.5 * (d * math.log(2 * math.pi) + math.log(np.linalg.det(cov)) + quad)


def naive_posteriors(model, x):
    """Bayes rule evaluated in plain probability space."""
    joint = np.array(
        [
            w * math.exp(naive_logdensity(x, m, c))
            for w, m, c in zip(model.mixture_weights, model.means, model.covariances)
        ]
    )
    return joint / joint.sum()


def random_spd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T + d * np.eye(d)


def random_model(rng, j, d):
    mix = rng.uniform(0.5, 2.0, size=j)
    mix /= mix.sum()
    means = rng.normal(scale=3.0, size=(j, d))
    covs = np.stack([random_spd(rng, d) for _ in range(j)])
    return GmmModel(mix, means, covs)


def two_blob_data(rng, n=300, spread=0.5):
    a = rng.normal(loc=(0.0, 0.0), scale=spread, size=(n, 2))
    b = rng.normal(loc=(8.0, 8.0), scale=spread, size=(n, 2))
    return np.vstack([a, b])


class TestLogDensity:
    def test_matches_naive_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            d = int(rng.integers(1, 6))
            mean = rng.normal(size=d)
            cov = random_spd(rng, d)
            x = rng.normal(scale=2.0, size=d)
            assert gaussian_logdensity(x, mean, cov) == pytest.approx(
                naive_logdensity(x, mean, cov), abs=1e-9
            )

    def test_standard_normal_at_origin(self):
        val = gaussian_logdensity([0.0], [0.0], [[1.0]])
        assert val == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)


class TestPosteriors:
    def test_matches_naive_bayes_rule(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            j, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
            model = random_model(rng, j, d)
            x = rng.normal(scale=2.0, size=d)
            np.testing.assert_allclose(
                posteriors(model, x), naive_posteriors(model, x), atol=1e-9
            )

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        model = random_model(rng, 4, 3)
        data = rng.normal(scale=3.0, size=(200, 3))
        resp = responsibilities(model, data)
        np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(resp >= 0)

    def test_far_point_raises_degenerate_error(self):
        model = GmmModel(
            np.array([1.0]), np.zeros((1, 2)), np.eye(2)[None, :, :]
        )
        with pytest.raises(DegenerateDensityError):
            posteriors(model, np.full(2, 1e200))


class TestDedupRows:
    def test_unique_rows_counts_and_inverse(self):
        x = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0], [3.0, 4.0], [0.0, 0.0]])
        unique, inverse, counts = dedup_rows(x)
        np.testing.assert_array_equal(
            unique, [[1.0, 2.0], [0.0, 0.0], [3.0, 4.0]]
        )
        np.testing.assert_array_equal(inverse, [0, 1, 0, 2, 1])
        np.testing.assert_array_equal(counts, [2.0, 2.0, 1.0])
        np.testing.assert_array_equal(unique[inverse], x)

    def test_weights_accumulate(self):
        x = np.array([[1.0], [1.0], [2.0]])
        _, _, counts = dedup_rows(x, np.array([0.5, 2.0, 3.0]))
        np.testing.assert_array_equal(counts, [2.5, 3.0])


class TestFitSingleComponent:
    def test_recovers_weighted_mean_and_biased_covariance(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(40, 2))
        w = rng.uniform(0.5, 3.0, size=40)
        config = EmConfig(n_init=1, reg_scale=1e-6)
        model = fit_em(x, 1, config, np.random.default_rng(0), point_weights=w)

        mean = w @ x / w.sum()
        diff = x - mean
        cov = (w * diff.T) @ diff / w.sum()
        ridge = config.reg_scale * np.trace(cov) / 2.0

        np.testing.assert_allclose(model.means[0], mean, atol=1e-9)
        np.testing.assert_allclose(
            model.covariances[0], cov + ridge * np.eye(2), atol=1e-9
        )
        np.testing.assert_allclose(model.mixture_weights, [1.0])


class TestFitTwoBlobs:
    def test_recovers_both_centres(self):
        rng = np.random.default_rng(4)
        data = two_blob_data(rng)
        model = fit_em(data, 2, EmConfig(n_init=3), np.random.default_rng(5))
        centres = model.means[np.argsort(model.means[:, 0])]
        np.testing.assert_allclose(centres[0], [0.0, 0.0], atol=0.3)
        np.testing.assert_allclose(centres[1], [8.0, 8.0], atol=0.3)
        np.testing.assert_allclose(model.mixture_weights, [0.5, 0.5], atol=0.05)

    def test_hard_assignment_separates_blobs(self):
        rng = np.random.default_rng(6)
        data = two_blob_data(rng, n=100)
        model = fit_em(data, 2, EmConfig(n_init=3), np.random.default_rng(7))
        labels = assign_hard(model, data)
        assert len(set(labels[:100])) == 1
        assert len(set(labels[100:])) == 1
        assert labels[0] != labels[100]


class TestWeightedEquivalence:
    def test_integer_weights_equal_repeated_rows(self):
        rng = np.random.default_rng(8)
        base = rng.normal(size=(12, 2)) + np.repeat([[0.0, 0.0], [6.0, 6.0]], 6, axis=0)
        reps = rng.integers(1, 4, size=12)
        repeated = np.repeat(base, reps, axis=0)
        config = EmConfig(n_init=2)
        weighted = fit_em(
            base, 2, config, np.random.default_rng(9), point_weights=reps.astype(float)
        )
        expanded = fit_em(repeated, 2, config, np.random.default_rng(9))
        np.testing.assert_allclose(weighted.means, expanded.means, atol=1e-9)
        np.testing.assert_allclose(
            weighted.covariances, expanded.covariances, atol=1e-9
        )
        np.testing.assert_allclose(
            weighted.mixture_weights, expanded.mixture_weights, atol=1e-9
        )
        assert weighted.log_likelihood == pytest.approx(
            expanded.log_likelihood, abs=1e-6
        )


class TestLikelihoodHistory:
    def test_monotone_on_random_problems(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            n = int(rng.integers(30, 80))
            d = int(rng.integers(1, 4))
            j = int(rng.integers(1, 4))
            data = rng.normal(scale=2.0, size=(n, d)) + rng.integers(
                0, 3, size=(n, 1)
            ) * 4.0
            model = fit_em(data, j, EmConfig(n_init=1), rng)
            history = np.array(model.ll_history)
            assert np.all(np.diff(history) >= -1e-7 * np.abs(history[:-1]))
            assert model.log_likelihood == pytest.approx(history[-1])

    def test_reported_iterations_match_history(self):
        rng = np.random.default_rng(11)
        data = two_blob_data(rng, n=50)
        model = fit_em(data, 2, EmConfig(n_init=1), np.random.default_rng(12))
        assert model.n_iter == len(model.ll_history)
        assert model.converged


class TestDeterminism:
    def test_same_seed_same_model(self):
        rng = np.random.default_rng(13)
        data = two_blob_data(rng, n=80)
        a = fit_em(data, 3, EmConfig(n_init=2), np.random.default_rng(14))
        b = fit_em(data, 3, EmConfig(n_init=2), np.random.default_rng(14))
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.covariances, b.covariances)
        np.testing.assert_array_equal(a.mixture_weights, b.mixture_weights)
        assert a.log_likelihood == b.log_likelihood


class TestDiagCovariance:
    def test_off_diagonals_stay_zero(self):
        rng = np.random.default_rng(15)
        data = two_blob_data(rng, n=60)
        config = EmConfig(n_init=2, covariance_type="diag")
        model = fit_em(data, 2, config, np.random.default_rng(16))
        for cov in model.covariances:
            np.testing.assert_array_equal(cov, np.diag(np.diag(cov)))


class TestValidation:
    def test_more_components_than_points_rejected(self):
        with pytest.raises(ValueError):
            fit_em(np.zeros((2, 2)), 3, EmConfig(n_init=1), np.random.default_rng(0))

    def test_non_finite_data_rejected(self):
        with pytest.raises(ValueError):
            fit_em(
                np.array([[0.0], [np.nan]]), 1, EmConfig(n_init=1),
                np.random.default_rng(0),
            )

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(ValueError):
            fit_em(
                np.zeros((3, 1)), 1, EmConfig(n_init=1), np.random.default_rng(0),
                point_weights=np.array([1.0, 0.0, 1.0]),
            )

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            EmConfig(tol=0.0)
        with pytest.raises(ValueError):
            EmConfig(covariance_type="spherical")
        with pytest.raises(ValueError):
            GmmModel(np.array([0.6, 0.6]), np.zeros((2, 1)), np.ones((2, 1, 1)))


class TestHardAssignmentTies:
    def test_equal_posterior_goes_to_lowest_index(self):
        model = GmmModel(
            np.array([0.5, 0.5]),
            np.array([[-1.0], [1.0]]),
            np.ones((2, 1, 1)),
        )
        labels = assign_hard(model, np.array([[0.0]]))
        assert labels[0] == 0


class TestModelFile:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(17)
        data = two_blob_data(rng, n=60)
        model = fit_em(data, 2, EmConfig(n_init=1), np.random.default_rng(18))
        path = str(tmp_path / "model.txt")
        save_gmm(path, model)
        loaded = load_gmm(path)
        np.testing.assert_array_equal(loaded.means, model.means)
        np.testing.assert_array_equal(loaded.covariances, model.covariances)
        np.testing.assert_array_equal(loaded.mixture_weights, model.mixture_weights)
        assert loaded.log_likelihood == model.log_likelihood
        assert loaded.covariance_type == model.covariance_type
        assert loaded.n_iter == model.n_iter
        assert loaded.converged == model.converged
