import unittest

import numpy as np

from rfbpnet.utils import ConfigurationError, DimensionError, LabelError, ParameterError, StateError
from rfbpnet.validators.abstract_classifier import (CLASSIFIERS, argmax_smallest,
                                                    make_classifier, standardize)
from rfbpnet.validators.cnn import ConvClassifier, cnn_classify
from rfbpnet.validators.decision_tree import (DecisionTree, best_split, decision_tree,
                                              gini_split_score)
from rfbpnet.validators.knn import KNearestNeighbours, knn_classify
from rfbpnet.validators.linear_svm import LinearSvm, linear_svm
from rfbpnet.validators.mlp import MultiLayerPerceptron, mlp_classify
from rfbpnet.validators.naive_bayes import GaussianNaiveBayes, gaussian_nb
from rfbpnet.validators.random_guess import random_guess

from helpers import blobs

CENTERS = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]


def accuracy(predicted, expected):
    return float(np.mean(np.asarray(predicted) == np.asarray(expected)))


class RegistryTestCase(unittest.TestCase):
    def test_every_validator_is_registered(self):
        self.assertEqual(sorted(CLASSIFIERS), ['cnn', 'dt', 'knn', 'mlp', 'nb', 'random', 'svm'])
        self.assertIsInstance(make_classifier('knn', k=3), KNearestNeighbours)

    def test_unknown_or_misconfigured(self):
        with self.assertRaises(ConfigurationError):
            make_classifier('forest')
        with self.assertRaises(ConfigurationError):
            make_classifier('knn', neighbours=3)

    def test_predict_before_fit(self):
        for name in CLASSIFIERS:
            with self.assertRaises(StateError):
                make_classifier(name).predict(np.zeros((1, 2)))

    def test_fit_checks(self):
        for name in ('knn', 'nb', 'dt', 'svm', 'random'):
            classifier = make_classifier(name)
            with self.assertRaises(DimensionError):
                classifier.fit(np.zeros((0, 2)), [])
            with self.assertRaises(DimensionError):
                classifier.fit(np.zeros((3, 2)), [0, 1])
            with self.assertRaises(LabelError):
                classifier.fit(np.zeros((2, 2)), [0, -1])

    def test_helpers(self):
        classes = np.array([2, 5, 7])
        np.testing.assert_array_equal(argmax_smallest(np.array([[1, 3, 3], [4, 4, 0]]), classes),
                                      [5, 2])
        train, test = standardize(np.array([[1.0, 5.0], [3.0, 5.0]]), np.array([[2.0, 6.0]]))
        np.testing.assert_allclose(train, [[-1.0, 0.0], [1.0, 0.0]])
        np.testing.assert_allclose(test, [[0.0, 1.0]])


class KnnTestCase(unittest.TestCase):
    def test_majority_vote(self):
        train_x = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
        train_y = np.array([0, 0, 0, 1, 1, 1])
        np.testing.assert_array_equal(knn_classify(train_x, train_y, [[0.5], [11.0], [9.0]], k=3),
                                      [0, 1, 1])

    def test_ties(self):
        # vote tie goes to the smallest class
        self.assertEqual(knn_classify([[0.0], [2.0]], [1, 0], [[1.0]], k=2)[0], 0)
        # distance tie keeps training order
        self.assertEqual(knn_classify([[-1.0], [1.0]], [1, 0], [[0.0]], k=1)[0], 1)

    def test_k_bounds(self):
        with self.assertRaises(ParameterError):
            KNearestNeighbours(0)
        with self.assertRaises(ParameterError):
            KNearestNeighbours(5).fit(np.zeros((4, 2)), [0, 1, 0, 1])

    def test_multidimensional_samples_are_flattened(self):
        train_x, train_y = blobs(CENTERS, 20, seed=1)
        test_x, test_y = blobs(CENTERS, 10, seed=2)
        predicted = knn_classify(train_x.reshape(-1, 1, 2), train_y, test_x.reshape(-1, 2, 1))
        self.assertEqual(accuracy(predicted, test_y), 1.0)


class NaiveBayesTestCase(unittest.TestCase):
    def test_separable_blobs(self):
        train_x, train_y = blobs(CENTERS, 30, seed=1)
        test_x, test_y = blobs(CENTERS, 10, seed=2)
        self.assertEqual(accuracy(gaussian_nb(train_x, train_y, test_x), test_y), 1.0)

    def test_constant_feature(self):
        train_x = np.array([[0.0, 1.0], [0.1, 1.0], [5.0, 1.0], [5.1, 1.0]])
        classifier = GaussianNaiveBayes().fit(train_x, [0, 0, 1, 1])
        posterior = classifier.log_posterior([[0.05, 1.0], [5.0, 2.0]])
        self.assertEqual(posterior.shape, (2, 2))
        self.assertTrue(np.all(np.isfinite(posterior)))
        np.testing.assert_array_equal(classifier.predict([[0.05, 1.0]]), [0])

    def test_prior_breaks_likelihood_ties(self):
        classifier = GaussianNaiveBayes().fit(np.array([[0.0], [2.0], [0.0], [2.0], [0.0], [2.0]]),
                                              [0, 0, 1, 1, 1, 1])
        np.testing.assert_array_equal(classifier.predict([[1.0]]), [1])


class DecisionTreeTestCase(unittest.TestCase):
    def test_gini_split_score(self):
        self.assertEqual(gini_split_score(np.array([2.0, 0.0]), np.array([0.0, 2.0])), 0.0)
        self.assertEqual(gini_split_score(np.array([1.0, 1.0]), np.array([1.0, 1.0])), 2.0)

    def test_best_split(self):
        x = np.array([[0.0, 7.0], [1.0, 7.0], [2.0, 7.0], [3.0, 7.0]])
        split = best_split(x, np.array([0, 0, 1, 1]), 2)
        self.assertEqual((split.score, split.feature, split.threshold), (0.0, 0, 1.5))
        self.assertIsNone(best_split(x[:, 1:], np.array([0, 0, 1, 1]), 2))
        # equal scores resolve to the lower feature
        self.assertEqual(best_split(np.hstack([x[:, :1], x[:, :1]]), np.array([0, 0, 1, 1]),
                                    2).feature, 0)

    def test_fits_training_set(self):
        rng = np.random.default_rng(0)
        train_x = rng.standard_normal((60, 3))
        train_y = (train_x[:, 0] * train_x[:, 1] > 0).astype(int)
        tree = DecisionTree().fit(train_x, train_y)
        self.assertEqual(accuracy(tree.predict(train_x), train_y), 1.0)
        self.assertLessEqual(tree.depth(), 12)

    def test_depth_limit(self):
        train_x, train_y = blobs(CENTERS, 10, seed=3)
        tree = DecisionTree(max_depth=1).fit(train_x, train_y)
        self.assertEqual(tree.depth(), 1)
        stump = DecisionTree(max_depth=0).fit(train_x, train_y)
        np.testing.assert_array_equal(stump.predict(train_x[:2]), [0, 0])
        with self.assertRaises(ParameterError):
            DecisionTree(max_depth=-1)

    def test_separable_blobs(self):
        train_x, train_y = blobs(CENTERS, 30, seed=1)
        test_x, test_y = blobs(CENTERS, 10, seed=2)
        self.assertEqual(accuracy(decision_tree(train_x, train_y, test_x), test_y), 1.0)


class LinearSvmTestCase(unittest.TestCase):
    def test_separable_blobs(self):
        train_x, train_y = blobs(CENTERS, 40, seed=1)
        test_x, test_y = blobs(CENTERS, 20, seed=2)
        self.assertGreaterEqual(accuracy(linear_svm(train_x, train_y, test_x), test_y), 0.95)

    def test_deterministic_per_seed(self):
        train_x, train_y = blobs(CENTERS, 20, spread=2.0, seed=1)
        first = LinearSvm(seed=4).fit(train_x, train_y)
        second = LinearSvm(seed=4).fit(train_x, train_y)
        np.testing.assert_array_equal(first.weights, second.weights)
        self.assertEqual(first.decision_function(train_x).shape, (60, 3))

    def test_parameters(self):
        with self.assertRaises(ParameterError):
            LinearSvm(lam=0.0)


class RandomGuessTestCase(unittest.TestCase):
    def test_uniform_over_training_classes(self):
        train_y = np.array([1, 4, 9])
        predicted = random_guess(np.zeros((3, 1)), train_y, np.zeros((3000, 1)), seed=2)
        counts = np.array([np.sum(predicted == label) for label in train_y])
        self.assertEqual(counts.sum(), 3000)
        self.assertTrue(np.all(np.abs(counts - 1000) < 150), counts)
        np.testing.assert_array_equal(
            predicted, random_guess(np.zeros((3, 1)), train_y, np.zeros((3000, 1)), seed=2))


class MlpTestCase(unittest.TestCase):
    def test_separable_blobs(self):
        train_x, train_y = blobs(CENTERS, 40, seed=1)
        test_x, test_y = blobs(CENTERS, 20, seed=2)
        classifier = MultiLayerPerceptron(hidden_width=16, epochs=50, lr=0.01, batch_size=16)
        predicted = classifier.fit(train_x, train_y).predict(test_x)
        self.assertGreaterEqual(accuracy(predicted, test_y), 0.95)
        self.assertEqual(mlp_classify(train_x, train_y, test_x[:3], 4, 1).shape, (3,))

    def test_deterministic_per_seed(self):
        train_x, train_y = blobs(CENTERS, 10, spread=2.0, seed=1)
        first = MultiLayerPerceptron(8, 5, seed=1).fit(train_x, train_y).predict(train_x)
        second = MultiLayerPerceptron(8, 5, seed=1).fit(train_x, train_y).predict(train_x)
        np.testing.assert_array_equal(first, second)

    def test_parameters(self):
        with self.assertRaises(ParameterError):
            MultiLayerPerceptron(hidden_width=0)


class CnnTestCase(unittest.TestCase):
    def tensor_blobs(self, per_class, seed):
        rng = np.random.default_rng(seed)
        labels = np.repeat(np.arange(3), per_class)
        samples = 0.3 * rng.standard_normal((labels.shape[0], 1, 6, 6))
        samples[:, 0, :3, :3] += 2.0 * (labels == 1)[:, None, None]
        samples[:, 0, 3:, 3:] += 2.0 * (labels == 2)[:, None, None]
        return samples, labels

    def test_learns_localised_patterns(self):
        train_x, train_y = self.tensor_blobs(20, seed=1)
        test_x, test_y = self.tensor_blobs(10, seed=2)
        predicted = ConvClassifier(epochs=40, lr=0.01, batch_size=8, conv_channels=[4, 4],
                                   fc_width=16).fit(train_x, train_y).predict(test_x)
        self.assertGreaterEqual(accuracy(predicted, test_y), 0.8)

    def test_needs_tensor_samples(self):
        with self.assertRaises(ConfigurationError):
            cnn_classify(np.zeros((4, 3)), [0, 1, 0, 1], np.zeros((2, 3)), epochs=1)
