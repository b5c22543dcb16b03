"""Joint feature map, scoring and prediction."""

import numpy as np
import pytest

from hassvm.core import (
    DomainDataset,
    LabeledSample,
    SourceModel,
    category_scores,
    joint_feature,
    predict,
    predict_batch,
    score,
)
from hassvm.errors import (
    DegenerateProblemError,
    DimensionError,
    InvalidCategoryError,
)


class TestJointFeature:
    def test_second_slot(self):
        np.testing.assert_array_equal(
            joint_feature([1, 2], 2, 3), [0, 0, 1, 2, 0, 0])

    def test_first_slot(self):
        np.testing.assert_array_equal(
            joint_feature([1, 2], 1, 3), [1, 2, 0, 0, 0, 0])

    def test_zero_input(self):
        np.testing.assert_array_equal(joint_feature([0, 0], 3, 3), np.zeros(6))

    def test_category_out_of_range(self):
        with pytest.raises(InvalidCategoryError):
            joint_feature([1, 2], 4, 3)
        with pytest.raises(InvalidCategoryError):
            joint_feature([1, 2], 0, 3)


class TestScore:
    W = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])  # K=3, n=2

    def test_hand_values(self):
        assert score(self.W, [2, 3], 1) == 2.0
        assert score(self.W, [2, 3], 2) == 3.0

    def test_zero_weights(self):
        assert score(np.zeros(6), [5, -7], 2) == 0.0

    def test_matches_joint_feature_dot(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            K = int(rng.integers(2, 6))
            n = int(rng.integers(1, 8))
            w = rng.normal(size=K * n)
            x = rng.normal(size=n)
            y = int(rng.integers(1, K + 1))
            assert score(w, x, y) == pytest.approx(
                float(w @ joint_feature(x, y, K)), rel=1e-12, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            score(np.zeros(7), [1.0, 2.0], 1)


class TestPredict:
    def test_picks_best_slot(self):
        assert predict([1, 0, 0, 1, 0, 0], [2, 3]) == 2

    def test_zero_weights_tie_breaks_low(self):
        assert predict(np.zeros(6), [4.0, 5.0]) == 1

    def test_exact_tie_lowest_index(self):
        assert predict([1, 0, 1, 0, 0, 0], [5, 0]) == 1

    def test_degenerate_single_category(self):
        with pytest.raises(DegenerateProblemError):
            predict([1.0, 2.0], [1.0, 2.0])

    def test_shift_every_slot_preserves_argmax(self):
        # Adding one vector to every category slot shifts all scores equally.
        rng = np.random.default_rng(11)
        for _ in range(300):
            K = int(rng.integers(2, 7))
            n = int(rng.integers(1, 6))
            w = rng.normal(size=K * n)
            x = rng.normal(size=n)
            delta = rng.normal(size=n)
            shifted = w + np.tile(delta, K)
            assert predict(w, x) == predict(shifted, x)

    def test_batch_agrees_with_single(self):
        rng = np.random.default_rng(3)
        K, n = 4, 5
        w = rng.normal(size=K * n)
        X = rng.normal(size=(40, n))
        batch = predict_batch(w, X, K)
        assert batch.tolist() == [predict(w, X[i]) for i in range(40)]

    def test_scores_vector(self):
        np.testing.assert_allclose(
            category_scores([1, 0, 0, 1, 0, 0], [2, 3]), [2.0, 3.0, 0.0])


class TestDomainTypes:
    def test_sample_validation(self):
        with pytest.raises(InvalidCategoryError):
            LabeledSample([1.0], 0, "d")
        with pytest.raises(DimensionError):
            LabeledSample([np.inf], 1, "d")

    def test_dataset_checks_width_and_labels(self):
        good = LabeledSample([1.0, 2.0], 1, "d")
        with pytest.raises(DimensionError):
            DomainDataset("d", (good,), feature_dim=3, category_count=2)
        with pytest.raises(InvalidCategoryError):
            DomainDataset("d", (LabeledSample([1.0, 2.0], 5, "d"),),
                          feature_dim=2, category_count=2)

    def test_dataset_matrix_layout(self):
        ds = DomainDataset.from_arrays(
            "d", np.array([[1.0, 2.0], [3.0, 4.0]]), [1, 2], 2)
        np.testing.assert_array_equal(ds.feature_matrix, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(ds.labels, [1, 2])
        assert len(ds) == 2

    def test_source_model_length_check(self):
        with pytest.raises(DimensionError):
            SourceModel(np.zeros(5), feature_dim=2, category_count=3)
        m = SourceModel(np.zeros(6), feature_dim=2, category_count=3)
        assert m.weights.shape == (6,)
