"""One-vs-rest linear SVM trained by Pegasos-style subgradient descent."""

import numpy as np

from rfbpnet.utils import ParameterError, make_rng
from rfbpnet.validators.abstract_classifier import (AbstractClassifier, argmax_smallest,
                                                    register_classifier, standardize)

SVM_STREAM = 41
DEFAULT_EPOCHS = 20
DEFAULT_LAMBDA = 1e-3
BATCH_SIZE = 32


def _with_bias(x):
    return np.hstack([x, np.ones((x.shape[0], 1))])


@register_classifier
class LinearSvm(AbstractClassifier):
    """Hinge loss + L2 over standardized inputs, one weight row per class."""

    NAME = 'svm'
    SEEDED = True

    weights = None

    # pylint: disable=too-many-arguments
    def __init__(self, epochs=DEFAULT_EPOCHS, lam=DEFAULT_LAMBDA, batch_size=BATCH_SIZE, seed=0):
        super().__init__()
        if epochs < 1 or lam <= 0 or batch_size < 1:
            raise ParameterError('epochs and batch_size must be positive and lam > 0')
        self.epochs = int(epochs)
        self.lam = float(lam)
        self.batch_size = int(batch_size)
        self.seed = seed
        self._train_x = None

    def fit(self, train_x, train_y):
        train_x, train_y = self._check_fit(train_x, train_y)
        self._train_x = train_x
        x, _ = standardize(train_x, train_x[:0])
        x = _with_bias(x)
        targets = np.where(train_y[:, None] == self.classes[None, :], 1.0, -1.0)
        weights = np.zeros((self.classes.shape[0], x.shape[1]))
        radius = 1.0 / np.sqrt(self.lam)
        rng = make_rng(self.seed, SVM_STREAM)
        step = 0
        for _ in range(self.epochs):
            order = rng.permutation(x.shape[0])
            for start in range(0, x.shape[0], self.batch_size):
                chosen = order[start:start + self.batch_size]
                step += 1
                rate = 1.0 / (self.lam * step)
                active = (targets[chosen] * (x[chosen] @ weights.T)) < 1.0
                subgrad = (self.lam * weights
                           - (active * targets[chosen]).T @ x[chosen] / chosen.shape[0])
                weights -= rate * subgrad
                norms = np.linalg.norm(weights, axis=1, keepdims=True)
                weights *= np.minimum(1.0, radius / np.maximum(norms, 1e-12))
        self.weights = weights
        return self

    def decision_function(self, test_x):
        test_x = self._check_predict(test_x)
        _, x = standardize(self._train_x, test_x)
        return _with_bias(x) @ self.weights.T

    def predict(self, test_x):
        return argmax_smallest(self.decision_function(test_x), self.classes)


# pylint: disable=too-many-arguments
def linear_svm(train_x, train_y, test_x, epochs=DEFAULT_EPOCHS, lam=DEFAULT_LAMBDA, seed=0):
    return LinearSvm(epochs, lam, seed=seed).fit(train_x, train_y).predict(test_x)
