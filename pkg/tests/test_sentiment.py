"""Tests for the logistic classifier, the cosine twin, and the topic model.

Numerical claims are checked against independent oracles: central finite
differences for gradients, brute-force averages for the cosine score, and
the binary solver itself for the two-class multinomial reduction.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsgauge.sentiment import (
    ConvergenceError,
    CosineScorer,
    cosine_score,
    cosine_score_batch,
    equivalence_report,
    load_logistic,
    load_multinomial,
    penalized_gradient,
    penalized_loss,
    save_logistic,
    save_multinomial,
    score,
    score_batch,
    train_logistic,
    train_multinomial,
)


def toy_problem(n=40, d=5, seed=11):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    true_w = rng.standard_normal(d)
    y = (X @ true_w + 0.3 * rng.standard_normal(n) > 0).astype(float)
    return X, y


def finite_difference_gradient(model, X, y, eps=1e-6):
    """Central differences of the penalized loss, the independent oracle."""
    from dataclasses import replace

    grad_w = np.zeros_like(model.weights)
    for j in range(model.dimension):
        bump = np.zeros_like(model.weights)
        bump[j] = eps
        up = penalized_loss(replace(model, weights=model.weights + bump), X, y)
        down = penalized_loss(replace(model, weights=model.weights - bump), X, y)
        grad_w[j] = (up - down) / (2 * eps)
    up = penalized_loss(replace(model, bias=model.bias + eps), X, y)
    down = penalized_loss(replace(model, bias=model.bias - eps), X, y)
    return grad_w, (up - down) / (2 * eps)


class TestTrainLogistic:
    def test_gradient_at_optimum_below_tolerance(self):
        X, y = toy_problem()
        model = train_logistic(X, y, l2_lambda=0.5)
        grad_w, grad_b = penalized_gradient(model, X, y)
        assert np.sqrt(grad_w @ grad_w + grad_b**2) <= 1e-7
        assert model.converged

    def test_analytic_gradient_matches_finite_differences(self):
        X, y = toy_problem()
        # evaluate away from the optimum, where the gradient is not tiny
        model = train_logistic(X, y, l2_lambda=0.5)
        from dataclasses import replace

        probe = replace(model, weights=model.weights + 0.37, bias=model.bias - 0.21)
        analytic_w, analytic_b = penalized_gradient(probe, X, y)
        numeric_w, numeric_b = finite_difference_gradient(probe, X, y)
        np.testing.assert_allclose(analytic_w, numeric_w, rtol=1e-6, atol=1e-8)
        assert abs(analytic_b - numeric_b) <= 1e-6 * max(1.0, abs(numeric_b))

    def test_weight_norm_shrinks_with_lambda(self):
        X, y = toy_problem()
        norms = [
            float(np.linalg.norm(train_logistic(X, y, l2_lambda=lam).weights))
            for lam in (0.01, 0.1, 1.0, 10.0)
        ]
        assert norms == sorted(norms, reverse=True)
        assert norms[-1] < norms[0]

    def test_loss_at_fit_below_any_perturbation(self):
        X, y = toy_problem()
        model = train_logistic(X, y, l2_lambda=1.0)
        best = penalized_loss(model, X, y)
        rng = np.random.default_rng(0)
        from dataclasses import replace

        for _ in range(20):
            other = replace(
                model,
                weights=model.weights + 0.1 * rng.standard_normal(model.dimension),
                bias=model.bias + 0.1 * rng.standard_normal(),
            )
            assert penalized_loss(other, X, y) >= best

    def test_single_positive_feature_gets_positive_weight(self):
        X = np.array([[1.0], [2.0], [-1.0], [-2.0]])
        y = np.array([1.0, 1.0, 0.0, 0.0])
        model = train_logistic(X, y, l2_lambda=0.1)
        assert model.weights[0] > 0

    def test_label_flip_negates_parameters(self):
        X, y = toy_problem()
        a = train_logistic(X, y, l2_lambda=1.0)
        b = train_logistic(X, 1.0 - y, l2_lambda=1.0)
        np.testing.assert_allclose(a.weights, -b.weights, atol=1e-6)
        assert abs(a.bias + b.bias) < 1e-6

    def test_deterministic(self):
        X, y = toy_problem()
        a = train_logistic(X, y)
        b = train_logistic(X, y)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.bias == b.bias

    def test_rejects_non_binary_labels(self):
        X, _ = toy_problem()
        with pytest.raises(ValueError, match="binary"):
            train_logistic(X, np.full(X.shape[0], 0.5))

    def test_rejects_single_class(self):
        X, _ = toy_problem()
        with pytest.raises(ValueError, match="each class"):
            train_logistic(X, np.ones(X.shape[0]))

    def test_unregularized_underdetermined_rejected(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((5, 10))
        y = np.array([0, 1, 0, 1, 0], dtype=float)
        with pytest.raises(ValueError, match="ill-posed"):
            train_logistic(X, y, l2_lambda=0.0)

    def test_zero_lambda_allowed_when_overdetermined(self):
        X, y = toy_problem(n=60, d=3)
        model = train_logistic(X, y, l2_lambda=0.0)
        assert model.converged


class TestScore:
    def test_sigmoid_symmetry(self):
        X, y = toy_problem()
        model = train_logistic(X, y)
        vec = X[3]
        from dataclasses import replace

        unbiased = replace(model, bias=0.0)
        assert abs(score(unbiased, vec) + score(unbiased, -vec) - 1.0) <= 1e-12

    def test_batch_matches_single(self):
        X, y = toy_problem()
        model = train_logistic(X, y)
        singles = np.array([score(model, row) for row in X])
        np.testing.assert_allclose(score_batch(model, X), singles, atol=1e-15)

    def test_dimension_mismatch_fatal(self):
        X, y = toy_problem()
        model = train_logistic(X, y)
        with pytest.raises(ValueError, match="dimension mismatch"):
            score(model, np.zeros(model.dimension + 1))


def unit_rows(rng, n, d):
    X = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1)[:, None]


class TestCosineScorer:
    def test_score_equals_average_cosine_difference(self):
        # brute force: mean over anchors of cos(x, p_i) minus mean of cos(x, n_j)
        rng = np.random.default_rng(4)
        pos = unit_rows(rng, 13, 8)
        neg = unit_rows(rng, 9, 8)
        scorer = CosineScorer(pos.mean(axis=0), neg.mean(axis=0))
        x = unit_rows(rng, 1, 8)[0]
        brute = np.mean([x @ p for p in pos]) - np.mean([x @ q for q in neg])
        assert abs(cosine_score(scorer, x) - brute) <= 1e-9

    def test_from_anchors_matches_manual_means(self):
        rng = np.random.default_rng(5)
        X = unit_rows(rng, 10, 6)
        y = np.array([1, 1, 1, 1, 0, 0, 0, 0, 0, 0])
        scorer = CosineScorer.from_anchors(X, y)
        np.testing.assert_allclose(scorer.positive_mean, X[:4].mean(axis=0))
        np.testing.assert_allclose(scorer.negative_mean, X[4:].mean(axis=0))

    def test_strict_mode_rejects_unnormalized_input(self):
        scorer = CosineScorer(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError, match="unit-norm"):
            cosine_score(scorer, np.array([2.0, 0.0]))
        # non-strict accepts it
        assert cosine_score(scorer, np.array([2.0, 0.0]), strict=False) == 2.0

    def test_identical_means_rejected(self):
        with pytest.raises(ValueError, match="coincide"):
            CosineScorer(np.array([0.5, 0.5]), np.array([0.5, 0.5]))

    def test_batch_matches_single(self):
        rng = np.random.default_rng(6)
        pos, neg = unit_rows(rng, 4, 5), unit_rows(rng, 4, 5)
        scorer = CosineScorer(pos.mean(axis=0), neg.mean(axis=0))
        X = unit_rows(rng, 7, 5)
        batch = cosine_score_batch(scorer, X)
        singles = [cosine_score(scorer, row) for row in X]
        np.testing.assert_allclose(batch, singles, atol=1e-15)


class TestEquivalenceReport:
    def test_insufficient_sample_flagged(self):
        X, y = toy_problem()
        model = train_logistic(X, y)
        scorer = CosineScorer.from_anchors(X, y)
        report = equivalence_report(model, scorer, X[:1])
        assert report.insufficient_sample
        assert report.pearson is None

    def test_perfectly_aligned_direction_gives_zero_angle(self):
        direction = np.array([1.0, 2.0, -1.0])
        from newsgauge.sentiment import LogisticModel

        model = LogisticModel(2.5 * direction, 0.0, 1.0, True, 1, 0.0)
        scorer = CosineScorer(direction, np.zeros(3))
        rng = np.random.default_rng(7)
        report = equivalence_report(model, scorer, rng.standard_normal((50, 3)))
        assert report.angle_degrees <= 1e-6
        assert report.spearman == pytest.approx(1.0)


class TestMultinomial:
    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((30, 4))
        labels = rng.choice(["a", "b", "c"], size=30).tolist()
        model = train_multinomial(X, labels)
        proba = model.predict_proba(X)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)

    def test_zero_parameters_give_uniform_probabilities(self):
        from newsgauge.sentiment import MultinomialModel

        model = MultinomialModel(
            ("a", "b", "c", "d"), np.zeros((4, 3)), np.zeros(4), 1.0, True, 0
        )
        proba = model.predict_proba(np.ones((2, 3)))
        np.testing.assert_allclose(proba, 0.25, atol=1e-15)

    def test_two_class_case_reduces_to_binary_model(self):
        X, y = toy_problem(n=50, d=6, seed=9)
        labels = ["pos" if v == 1.0 else "neg" for v in y]
        multi = train_multinomial(X, labels, l2_lambda=1.0)
        binary = train_logistic(X, y, l2_lambda=1.0)
        # classes sorted alphabetically: neg is the reference class, so row 1
        # holds the positive-class coefficients
        assert multi.classes == ("neg", "pos")
        np.testing.assert_allclose(multi.weights[1], binary.weights, atol=1e-6)
        assert abs(multi.biases[1] - binary.bias) <= 1e-6
        p_multi = multi.predict_proba(X)[:, 1]
        p_binary = score_batch(binary, X)
        np.testing.assert_allclose(p_multi, p_binary, atol=1e-6)

    def test_reference_class_row_is_zero(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((24, 4))
        labels = rng.choice(["a", "b", "c"], size=24).tolist()
        model = train_multinomial(X, labels)
        np.testing.assert_array_equal(model.weights[0], 0.0)
        assert model.biases[0] == 0.0

    def test_separable_classes_recovered(self):
        rng = np.random.default_rng(12)
        centers = {"a": np.array([4.0, 0.0]), "b": np.array([-4.0, 0.0]),
                   "c": np.array([0.0, 4.0])}
        X, labels = [], []
        for name, center in centers.items():
            X.append(center + 0.3 * rng.standard_normal((20, 2)))
            labels += [name] * 20
        X = np.vstack(X)
        model = train_multinomial(X, labels, l2_lambda=0.1)
        predicted = [model.classes[k] for k in model.predict_proba(X).argmax(axis=1)]
        accuracy = np.mean([p == t for p, t in zip(predicted, labels)])
        assert accuracy >= 0.99

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="two classes"):
            train_multinomial(np.zeros((3, 2)), ["a", "a", "a"])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=10, deadline=None)
    def test_probability_rows_always_normalized(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((12, 3))
        labels = (["a"] * 6) + (["b"] * 6)
        model = train_multinomial(X, labels)
        proba = model.predict_proba(rng.standard_normal((5, 3)))
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(proba >= 0)


class TestSerialization:
    def test_logistic_round_trip(self, tmp_path):
        X, y = toy_problem()
        model = train_logistic(X, y, l2_lambda=0.7)
        path = tmp_path / "m.blob"
        save_logistic(model, path)
        loaded = load_logistic(path)
        np.testing.assert_array_equal(loaded.weights, model.weights)
        assert loaded.bias == model.bias
        assert loaded.l2_lambda == 0.7

    def test_logistic_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "m.blob"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(ValueError, match="not a sentiment model"):
            load_logistic(path)

    def test_multinomial_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        X = rng.standard_normal((30, 4))
        labels = rng.choice(["alpha", "beta", "gamma"], size=30).tolist()
        model = train_multinomial(X, labels)
        path = tmp_path / "t.blob"
        save_multinomial(model, path)
        loaded = load_multinomial(path)
        assert loaded.classes == model.classes
        np.testing.assert_array_equal(loaded.weights, model.weights)
        np.testing.assert_array_equal(loaded.biases, model.biases)
        np.testing.assert_allclose(
            loaded.predict_proba(X), model.predict_proba(X), atol=1e-15
        )

    def test_scores_survive_round_trip_exactly(self, tmp_path):
        X, y = toy_problem()
        model = train_logistic(X, y)
        save_logistic(model, tmp_path / "m.blob")
        loaded = load_logistic(tmp_path / "m.blob")
        np.testing.assert_array_equal(score_batch(loaded, X), score_batch(model, X))
