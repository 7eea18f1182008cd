"""CART decision tree with Gini impurity."""

from collections import namedtuple

import numpy as np

from rfbpnet.utils import ParameterError
from rfbpnet.validators.abstract_classifier import AbstractClassifier, register_classifier

DEFAULT_MAX_DEPTH = 12
FEATURE_BLOCK = 64

# A leaf has feature None and carries its class in label.
Node = namedtuple('Node', 'feature threshold left right label')
Split = namedtuple('Split', 'score feature threshold')


def gini_split_score(left_counts, right_counts):
    """Size-weighted Gini impurity of a split, times the node size.

    Both arguments hold class counts along their last axis.
    """
    n_left = left_counts.sum(axis=-1)
    n_right = right_counts.sum(axis=-1)
    left = n_left - (left_counts ** 2).sum(axis=-1) / n_left
    right = n_right - (right_counts ** 2).sum(axis=-1) / n_right
    return left + right


def best_split(x, y_index, num_classes):
    """Lowest-scoring threshold split of x [n, d], or None when every feature is constant.

    Thresholds are midpoints between consecutive distinct values. Equal scores
    resolve to the lowest feature index, then the lowest threshold.
    """
    dims = x.shape[1]
    total = np.bincount(y_index, minlength=num_classes).astype(np.float64)
    best = None
    for start in range(0, dims, FEATURE_BLOCK):
        block = x[:, start:start + FEATURE_BLOCK]
        order = np.argsort(block, axis=0, kind='stable')
        sorted_x = np.take_along_axis(block, order, axis=0)
        onehot = np.eye(num_classes)[y_index[order]]
        left = np.cumsum(onehot, axis=0)[:-1]
        scores = gini_split_score(left, total - left)
        scores[sorted_x[:-1] >= sorted_x[1:]] = np.inf
        positions = np.argmin(scores, axis=0)
        block_scores = scores[positions, np.arange(block.shape[1])]
        feature = int(np.argmin(block_scores))
        score = block_scores[feature]
        if not np.isfinite(score) or (best is not None and not score < best.score):
            continue
        low = sorted_x[positions[feature], feature]
        high = sorted_x[positions[feature] + 1, feature]
        threshold = (low + high) / 2.0
        if threshold >= high:
            threshold = low
        best = Split(score, start + feature, threshold)
    return best


@register_classifier
class DecisionTree(AbstractClassifier):
    NAME = 'dt'

    root = None

    def __init__(self, max_depth=DEFAULT_MAX_DEPTH):
        super().__init__()
        if max_depth < 0:
            raise ParameterError('max_depth must be non-negative, got %d' % max_depth)
        self.max_depth = int(max_depth)

    def _grow(self, x, y_index, depth):
        counts = np.bincount(y_index, minlength=self.classes.shape[0])
        label = int(self.classes[np.argmax(counts)])
        if depth >= self.max_depth or np.count_nonzero(counts) <= 1:
            return Node(None, None, None, None, label)
        split = best_split(x, y_index, self.classes.shape[0])
        if split is None:
            return Node(None, None, None, None, label)
        goes_left = x[:, split.feature] <= split.threshold
        return Node(split.feature, split.threshold,
                    self._grow(x[goes_left], y_index[goes_left], depth + 1),
                    self._grow(x[~goes_left], y_index[~goes_left], depth + 1),
                    label)

    def fit(self, train_x, train_y):
        train_x, train_y = self._check_fit(train_x, train_y)
        self.root = self._grow(train_x, np.searchsorted(self.classes, train_y), 0)
        return self

    def depth(self, node=None):
        node = node or self.root
        if node.feature is None:
            return 0
        return 1 + max(self.depth(node.left), self.depth(node.right))

    def predict(self, test_x):
        test_x = self._check_predict(test_x)
        predictions = np.empty(test_x.shape[0], dtype=np.int64)
        for row, sample in enumerate(test_x):
            node = self.root
            while node.feature is not None:
                node = node.left if sample[node.feature] <= node.threshold else node.right
            predictions[row] = node.label
        return predictions


def decision_tree(train_x, train_y, test_x, max_depth=DEFAULT_MAX_DEPTH):
    return DecisionTree(max_depth).fit(train_x, train_y).predict(test_x)
