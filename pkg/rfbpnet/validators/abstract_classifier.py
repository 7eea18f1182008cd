"""Common interface and registry for the audit classifiers."""

import numpy as np

from rfbpnet.utils import ConfigurationError, DimensionError, LabelError, StateError, get_logger

CLASSIFIERS = {}


def register_classifier(cls):
    """Class decorator: make cls constructible by its NAME through make_classifier."""
    CLASSIFIERS[cls.NAME] = cls
    return cls


def make_classifier(name, **params):
    if name not in CLASSIFIERS:
        raise ConfigurationError('unknown validator %r, expected one of %s'
                                 % (name, ', '.join(sorted(CLASSIFIERS))))
    try:
        return CLASSIFIERS[name](**params)
    except TypeError as exception:
        raise ConfigurationError('bad parameters for validator %s: %s'
                                 % (name, exception)) from exception


class AbstractClassifier:
    """fit(train_x, train_y) then predict(test_x); labels are ints in 0..M-1.

    VECTOR_INPUT classifiers see samples flattened to [N, D]; the others get
    them in their stored shape.
    """

    NAME = None
    VECTOR_INPUT = True
    SEEDED = False

    classes = None

    def __init__(self):
        self.logger = get_logger('rfbpnet.validators.%s' % self.NAME)

    def _check_fit(self, train_x, train_y):
        train_x = np.asarray(train_x, dtype=np.float64)
        train_y = np.asarray(train_y, dtype=np.int64).reshape(-1)
        if train_x.shape[0] == 0:
            raise DimensionError('%s cannot be fitted on an empty training set' % self.NAME)
        if train_x.shape[0] != train_y.shape[0]:
            raise DimensionError('%d training samples but %d labels'
                                 % (train_x.shape[0], train_y.shape[0]))
        if np.any(train_y < 0):
            raise LabelError('class labels must be non-negative')
        if self.VECTOR_INPUT:
            train_x = train_x.reshape(train_x.shape[0], -1)
        self.classes = np.unique(train_y)
        return train_x, train_y

    def _check_predict(self, test_x):
        if self.classes is None:
            raise StateError('%s.predict called before fit' % self.NAME)
        test_x = np.asarray(test_x, dtype=np.float64)
        if self.VECTOR_INPUT:
            test_x = test_x.reshape(test_x.shape[0], -1)
        return test_x

    def fit(self, train_x, train_y):
        raise NotImplementedError

    def predict(self, test_x):
        raise NotImplementedError

    def fit_predict(self, train_x, train_y, test_x):
        return self.fit(train_x, train_y).predict(test_x)


def argmax_smallest(scores, classes):
    """classes[argmax] per row; np.argmax already resolves ties to the first column."""
    return classes[np.argmax(scores, axis=1)]


def standardize(train_x, test_x):
    """Scale both sets by the train mean and std; constant features map to 0."""
    mean = train_x.mean(axis=0)
    std = train_x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (train_x - mean) / std, (test_x - mean) / std
