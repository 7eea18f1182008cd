"""Gaussian naive Bayes."""

import numpy as np

from rfbpnet.validators.abstract_classifier import (AbstractClassifier, argmax_smallest,
                                                    register_classifier)

VAR_FLOOR = 1e-9


@register_classifier
class GaussianNaiveBayes(AbstractClassifier):
    NAME = 'nb'

    log_prior = None
    means = None
    variances = None

    def __init__(self, var_floor=VAR_FLOOR):
        super().__init__()
        self.var_floor = var_floor

    def fit(self, train_x, train_y):
        train_x, train_y = self._check_fit(train_x, train_y)
        counts = np.array([np.sum(train_y == label) for label in self.classes], dtype=np.float64)
        self.log_prior = np.log(counts / counts.sum())
        self.means = np.stack([train_x[train_y == label].mean(axis=0) for label in self.classes])
        self.variances = np.maximum(
            np.stack([train_x[train_y == label].var(axis=0) for label in self.classes]),
            self.var_floor)
        return self

    def log_posterior(self, test_x):
        """Unnormalised class log-posteriors [N, num_classes]."""
        test_x = self._check_predict(test_x)
        diff = test_x[:, None, :] - self.means[None, :, :]
        log_likelihood = -0.5 * (np.log(2.0 * np.pi * self.variances)[None]
                                 + diff ** 2 / self.variances[None]).sum(axis=2)
        return self.log_prior[None, :] + log_likelihood

    def predict(self, test_x):
        return argmax_smallest(self.log_posterior(test_x), self.classes)


def gaussian_nb(train_x, train_y, test_x):
    return GaussianNaiveBayes().fit(train_x, train_y).predict(test_x)
