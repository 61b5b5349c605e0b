import numpy as np
import pytest

from simkit.learners import (
    LogRegModel,
    dual_objective,
    load_svm,
    logreg_decision,
    logreg_gradient,
    logreg_train,
    loglik_logreg,
    save_svm,
    svm_decision,
    svm_train,
)

from oracles import svm_dual_value


def random_kernel_problem(rng, n=4):
    G = rng.normal(size=(n, n))
    K = G @ G.T
    y = rng.choice([-1.0, 1.0], size=n)
    if np.all(y == y[0]):
        y[0] = -y[0]
    return K, y


class TestSvmTrain:
    def test_two_point_problem(self):
        # x = +1 (y=+1), x = -1 (y=-1) under the linear kernel
        K = np.array([[1.0, -1.0], [-1.0, 1.0]])
        y = np.array([1.0, -1.0])
        model = svm_train(K, y, C=10.0, eta=0.01, max_epochs=50000, tol=1e-12)
        # the dual optimum value is 0.5 (the symmetric point has a1=a2=0.5)
        assert model.objective_trace[-1] == pytest.approx(0.5, abs=1e-6)
        assert model.alphas.sum() == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(model.alphas, 0.5, atol=0.02)
        # w = sum alpha_i y_i x_i = 1: decision boundary at 0
        scores = svm_decision(model, np.array([[0.0, 0.0], [1.0, -1.0], [-1.0, 1.0]]))
        assert scores[0] == pytest.approx(0.0, abs=1e-9)
        assert scores[1] == pytest.approx(1.0, abs=1e-6)
        assert scores[2] == pytest.approx(-1.0, abs=1e-6)

    def test_duplicated_dataset_same_decision(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=6)
        y = np.where(x + 0.3 * rng.normal(size=6) > 0, 1.0, -1.0)
        if np.all(y == y[0]):
            y[0] = -y[0]
        K = np.outer(x, x)
        x2 = np.concatenate([x, x])
        y2 = np.concatenate([y, y])
        K2 = np.outer(x2, x2)
        m1 = svm_train(K, y, C=2.0, max_epochs=20000, tol=1e-12)
        m2 = svm_train(K2, y2, C=1.0, max_epochs=20000, tol=1e-12)  # halved box
        test = np.linspace(-2, 2, 9)
        s1 = svm_decision(m1, np.outer(test, x))
        s2 = svm_decision(m2, np.outer(test, x2))
        assert np.allclose(s1, s2, atol=1e-4)

    def test_alphas_stay_in_box(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            K, y = random_kernel_problem(rng)
            C = 0.3
            model = svm_train(K, y, C=C, max_epochs=50)
            assert np.all(model.alphas >= 0.0)
            assert np.all(model.alphas <= C)

    def test_objective_trace_monotone_with_default_eta(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            K, y = random_kernel_problem(rng, n=8)
            model = svm_train(K, y, C=1.0, max_epochs=200)
            assert np.all(np.diff(model.objective_trace) >= -1e-10)

    def test_objective_matches_helper(self):
        rng = np.random.default_rng(3)
        K, y = random_kernel_problem(rng)
        model = svm_train(K, y, C=1.0, max_epochs=500)
        assert model.objective_trace[-1] == pytest.approx(
            svm_dual_value(K, y, model.alphas), abs=1e-10
        )
        assert dual_objective(K, y, model.alphas) == pytest.approx(
            model.objective_trace[-1], abs=1e-10
        )

    def test_label_negation_negates_scores(self):
        rng = np.random.default_rng(4)
        K, y = random_kernel_problem(rng, n=6)
        m_pos = svm_train(K, y, C=1.5, max_epochs=5000, tol=1e-12)
        m_neg = svm_train(K, -y, C=1.5, max_epochs=5000, tol=1e-12)
        K_test = rng.normal(size=(3, 6))
        assert np.allclose(svm_decision(m_pos, K_test), -svm_decision(m_neg, K_test), atol=1e-12)

    def test_kkt_on_small_problems(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            K, y = random_kernel_problem(rng, n=5)
            C = 1.0
            model = svm_train(K, y, C=C, max_epochs=100000, tol=1e-12)
            margins = y * svm_decision(model, K)
            for i in range(5):
                a = model.alphas[i]
                if a < 1e-6:
                    assert margins[i] >= 1 - 1e-2
                elif a > C - 1e-6:
                    assert margins[i] <= 1 + 1e-2
                else:
                    assert abs(margins[i] - 1) <= 1e-2

    def test_input_validation(self):
        with pytest.raises(ValueError):
            svm_train(np.ones((2, 3)), np.array([1.0, -1.0]))
        with pytest.raises(ValueError):
            svm_train(np.array([[1.0, 0.5], [0.2, 1.0]]), np.array([1.0, -1.0]))
        with pytest.raises(ValueError):
            svm_train(np.eye(2), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            svm_train(np.eye(2), np.array([1.0, -1.0]), C=0.0)

    def test_positive_weight_widens_positive_box(self):
        rng = np.random.default_rng(12)
        K, y = random_kernel_problem(rng, n=8)
        model = svm_train(K, y, C=0.2, positive_weight=3.0, max_epochs=2000)
        assert np.all(model.alphas[y > 0] <= 0.6 + 1e-12)
        assert np.all(model.alphas[y < 0] <= 0.2 + 1e-12)
        assert np.any(model.alphas[y > 0] > 0.2)  # the wider box is actually used

    def test_zero_alpha_model_constant_score(self):
        model = svm_train(np.eye(2) * 1e-9, np.array([1.0, -1.0]), C=1.0, max_epochs=1,
                          eta=0.0001)
        scores = svm_decision(model, np.zeros((3, 2)))
        assert np.allclose(scores, model.bias)

    def test_decision_shape_mismatch(self):
        model = svm_train(np.eye(2), np.array([1.0, -1.0]), max_epochs=5)
        with pytest.raises(ValueError):
            svm_decision(model, np.ones((2, 3)))


class TestSvmPersistence:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        K, y = random_kernel_problem(rng)
        model = svm_train(K, y, C=1.0, max_epochs=200)
        path = tmp_path / "svm.json"
        save_svm(model, path)
        loaded = load_svm(path)
        assert np.array_equal(loaded.alphas, model.alphas)
        assert np.array_equal(loaded.labels, model.labels)
        assert loaded.C == model.C
        assert np.array_equal(loaded.support_indices, model.support_indices)


class TestLogReg:
    def test_symmetric_data_zero_bias(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(40, 2))
        X = np.vstack([X, -X])
        y = np.concatenate([np.ones(40), np.zeros(40)])
        Xb = np.hstack([X, np.ones((80, 1))])
        model = logreg_train(Xb, y, eta=0.05, epochs=2000)
        assert abs(model.weights[-1]) < 1e-6

    def test_gradient_at_zero(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(20, 3))
        y = rng.integers(0, 2, 20).astype(float)
        g = logreg_gradient(X, y, np.zeros(3))
        assert np.allclose(g, X.T @ (y - 0.5), atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(15, 3))
        y = rng.integers(0, 2, 15).astype(float)
        w = rng.normal(size=3) * 0.5
        g = logreg_gradient(X, y, w, l2=0.1)
        h = 1e-6
        for i in range(3):
            up, dn = w.copy(), w.copy()
            up[i] += h
            dn[i] -= h
            fd = (loglik_logreg(X, y, up, l2=0.1) - loglik_logreg(X, y, dn, l2=0.1)) / (2 * h)
            assert abs(g[i] - fd) <= 1e-5 * max(1.0, abs(fd))

    def test_loss_invariant_under_compensating_rescale(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(25, 3))
        y = rng.integers(0, 2, 25).astype(float)
        w = rng.normal(size=3)
        scale = np.array([2.0, 0.5, 4.0])
        assert loglik_logreg(X * scale, y, w / scale) == pytest.approx(
            loglik_logreg(X, y, w), rel=1e-12
        )

    def test_degenerate_labels_error(self):
        with pytest.raises(ValueError):
            logreg_train(np.ones((4, 2)), np.ones(4))

    def test_predictions_are_probabilities(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(30, 2))
        y = (X[:, 0] > 0).astype(float)
        Xb = np.hstack([X, np.ones((30, 1))])
        model = logreg_train(Xb, y, eta=0.1, epochs=500)
        p = logreg_decision(model, Xb)
        assert np.all((p > 0) & (p < 1))
        assert np.mean((p > 0.5) == (y == 1)) > 0.8

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LogRegModel(np.array([np.nan]))
