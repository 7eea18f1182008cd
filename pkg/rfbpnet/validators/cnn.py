"""Convolutional classifier for tensor-shaped samples.

The conv stack is the one of the extractor; the FC part ends in a linear
layer over the classes instead of the feature refinement.
"""

import numpy as np

from rfbpnet.layers import LayerSpec, Sequential
from rfbpnet.rfbp_net import ExtractorConfig
from rfbpnet.utils import ConfigurationError, ParameterError, make_rng
from rfbpnet.validators.abstract_classifier import (AbstractClassifier, argmax_smallest,
                                                    register_classifier)
from rfbpnet.validators.mlp import fit_network

CNN_STREAM = 43
DEFAULT_EPOCHS = 30
BATCH_SIZE = 32


@register_classifier
class ConvClassifier(AbstractClassifier):
    NAME = 'cnn'
    SEEDED = True
    VECTOR_INPUT = False

    stack = None

    # pylint: disable=too-many-arguments
    def __init__(self, epochs=DEFAULT_EPOCHS, lr=1e-3, batch_size=BATCH_SIZE, seed=0,
                 conv_channels=None, fc_width=256):
        super().__init__()
        if epochs < 1 or batch_size < 1:
            raise ParameterError('epochs and batch_size must be positive')
        self.epochs = int(epochs)
        self.lr = lr
        self.batch_size = int(batch_size)
        self.seed = seed
        self.conv_channels = list(conv_channels or [16, 32, 64])
        self.fc_width = int(fc_width)
        self.mean = None
        self.std = None

    def _scale(self, x):
        return ((x - self.mean) / self.std).astype(np.float32)

    def fit(self, train_x, train_y):
        train_x, train_y = self._check_fit(train_x, train_y)
        if train_x.ndim != 4:
            raise ConfigurationError('the cnn validator needs [N, C, H, W] samples, got %d-D '
                                     'samples' % (train_x.ndim - 1))
        config = ExtractorConfig(input_shape=list(train_x.shape[1:]),
                                 conv_channels=self.conv_channels)
        flat_size = config.flat_size()
        specs = config.conv_specs() + [
            LayerSpec('linear', flat_size, self.fc_width),
            LayerSpec('activation', activation='sigmoid'),
            LayerSpec('linear', self.fc_width, self.classes.shape[0])]
        rng = make_rng(self.seed, CNN_STREAM)
        self.stack, _ = Sequential.from_specs(specs, train_x.shape[1:], 'cnn', rng, np.float32)
        self.mean = train_x.mean(axis=0)
        std = train_x.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)
        fit_network(self.stack, self._scale(train_x), np.searchsorted(self.classes, train_y),
                    self.epochs, self.batch_size, self.lr, rng, self.logger)
        return self

    def predict(self, test_x):
        test_x = self._check_predict(test_x)
        logits, _ = self.stack.forward(self._scale(test_x), train=False)
        return argmax_smallest(logits, self.classes)


def cnn_classify(train_x, train_y, test_x, epochs=DEFAULT_EPOCHS, seed=0):
    return ConvClassifier(epochs, seed=seed).fit(train_x, train_y).predict(test_x)
