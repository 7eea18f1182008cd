"""Two-layer fully connected network, the designated feature-quality evaluator."""

import numpy as np

from rfbpnet.layers import LayerSpec, Sequential
from rfbpnet.losses import softmax_cross_entropy
from rfbpnet.optimizer import Adam
from rfbpnet.utils import NumericError, ParameterError, make_rng
from rfbpnet.validators.abstract_classifier import (AbstractClassifier, argmax_smallest,
                                                    register_classifier, standardize)

MLP_STREAM = 42
DEFAULT_HIDDEN = 128
DEFAULT_EPOCHS = 50
BATCH_SIZE = 64


# pylint: disable=too-many-arguments
def fit_network(stack, x, y_index, epochs, batch_size, lr, rng, logger):
    """Minibatch softmax cross-entropy training of a Sequential with Adam.

    The permutation is split into near-equal batches so none falls below two
    samples once there are at least two.

    Raises:
        NumericError: the loss or a gradient became non-finite.
    """
    optimizer = Adam(stack.parameters(), lr=lr)
    num_batches = max(1, -(-x.shape[0] // batch_size))
    if x.shape[0] >= 2:
        num_batches = min(num_batches, x.shape[0] // 2)
    loss = float('nan')
    for epoch in range(1, epochs + 1):
        for chosen in np.array_split(rng.permutation(x.shape[0]), num_batches):
            optimizer.zero_grad()
            logits, caches = stack.forward(x[chosen], train=True)
            loss, dlogits = softmax_cross_entropy(logits, y_index[chosen])
            if not np.isfinite(loss):
                raise NumericError('classifier loss became non-finite at epoch %d' % epoch)
            stack.backward(dlogits.astype(x.dtype), caches)
            optimizer.step()
        logger.debug('epoch %d/%d loss %.4f', epoch, epochs, loss)
    return loss


@register_classifier
class MultiLayerPerceptron(AbstractClassifier):
    """Linear(D, hidden) - ReLU - Linear(hidden, M) on standardized inputs."""

    NAME = 'mlp'
    SEEDED = True

    stack = None

    # pylint: disable=too-many-arguments
    def __init__(self, hidden_width=DEFAULT_HIDDEN, epochs=DEFAULT_EPOCHS, lr=1e-3,
                 batch_size=BATCH_SIZE, seed=0):
        super().__init__()
        if hidden_width < 1 or epochs < 1 or batch_size < 1:
            raise ParameterError('hidden_width, epochs and batch_size must be positive')
        self.hidden_width = int(hidden_width)
        self.epochs = int(epochs)
        self.lr = lr
        self.batch_size = int(batch_size)
        self.seed = seed
        self._train_x = None

    def fit(self, train_x, train_y):
        train_x, train_y = self._check_fit(train_x, train_y)
        self._train_x = train_x
        x, _ = standardize(train_x, train_x[:0])
        rng = make_rng(self.seed, MLP_STREAM)
        specs = [LayerSpec('linear', x.shape[1], self.hidden_width),
                 LayerSpec('activation', activation='relu'),
                 LayerSpec('linear', self.hidden_width, self.classes.shape[0])]
        self.stack, _ = Sequential.from_specs(specs, (x.shape[1],), 'mlp', rng, np.float64)
        fit_network(self.stack, x, np.searchsorted(self.classes, train_y), self.epochs,
                    self.batch_size, self.lr, rng, self.logger)
        return self

    def predict(self, test_x):
        test_x = self._check_predict(test_x)
        _, x = standardize(self._train_x, test_x)
        logits, _ = self.stack.forward(x, train=False)
        return argmax_smallest(logits, self.classes)


# pylint: disable=too-many-arguments
def mlp_classify(train_x, train_y, test_x, hidden_width=DEFAULT_HIDDEN, epochs=DEFAULT_EPOCHS,
                 seed=0):
    return MultiLayerPerceptron(hidden_width, epochs, seed=seed).fit(train_x,
                                                                      train_y).predict(test_x)
