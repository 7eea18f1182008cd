"""Exact k-nearest-neighbour classifier."""

import numpy as np
from scipy.spatial.distance import cdist

from rfbpnet.utils import ParameterError
from rfbpnet.validators.abstract_classifier import (AbstractClassifier, argmax_smallest,
                                                    register_classifier)

DEFAULT_K = 5
DISTANCE_CHUNK = 1024


@register_classifier
class KNearestNeighbours(AbstractClassifier):
    """Euclidean distance, majority vote among the k nearest, ties to the smallest class."""

    NAME = 'knn'

    train_x = None
    train_y = None

    def __init__(self, k=DEFAULT_K):
        super().__init__()
        if k < 1:
            raise ParameterError('k must be at least 1, got %d' % k)
        self.k = int(k)

    def fit(self, train_x, train_y):
        train_x, train_y = self._check_fit(train_x, train_y)
        if self.k > train_x.shape[0]:
            raise ParameterError('k=%d exceeds the %d training samples'
                                 % (self.k, train_x.shape[0]))
        self.train_x, self.train_y = train_x, train_y
        return self

    def predict(self, test_x):
        test_x = self._check_predict(test_x)
        predictions = np.empty(test_x.shape[0], dtype=np.int64)
        for start in range(0, test_x.shape[0], DISTANCE_CHUNK):
            chunk = test_x[start:start + DISTANCE_CHUNK]
            distances = cdist(chunk, self.train_x, 'sqeuclidean')
            # stable sort: equal distances keep training order
            nearest = np.argsort(distances, axis=1, kind='stable')[:, :self.k]
            votes = np.zeros((chunk.shape[0], self.classes.shape[0]))
            columns = np.searchsorted(self.classes, self.train_y[nearest])
            np.add.at(votes, (np.arange(chunk.shape[0])[:, None], columns), 1)
            predictions[start:start + chunk.shape[0]] = argmax_smallest(votes, self.classes)
        return predictions


def knn_classify(train_x, train_y, test_x, k=DEFAULT_K):
    return KNearestNeighbours(k).fit(train_x, train_y).predict(test_x)
