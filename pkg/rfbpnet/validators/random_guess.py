"""Uniform random guessing over the classes seen in training."""

from rfbpnet.utils import make_rng
from rfbpnet.validators.abstract_classifier import AbstractClassifier, register_classifier

GUESS_STREAM = 44


@register_classifier
class RandomGuess(AbstractClassifier):
    NAME = 'random'
    SEEDED = True

    def __init__(self, seed=0):
        super().__init__()
        self.seed = seed

    def fit(self, train_x, train_y):
        self._check_fit(train_x, train_y)
        return self

    def predict(self, test_x):
        test_x = self._check_predict(test_x)
        rng = make_rng(self.seed, GUESS_STREAM)
        return rng.choice(self.classes, size=test_x.shape[0])


def random_guess(train_x, train_y, test_x, seed=0):
    return RandomGuess(seed).fit(train_x, train_y).predict(test_x)
