"""Siamese training of RfbpNet with the joint contrastive / identity objective."""

from collections import namedtuple
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from rfbpnet.losses import (check_alpha, contrastive_loss_batch, identity_loss_batch,
                            joint_loss)
from rfbpnet.optimizer import Adam
from rfbpnet.pairing import IntegrityError
from rfbpnet.utils import ConfigurationError, LabelError, NumericError, get_logger, make_rng

TRAIN_STREAM = 31
HISTORY_COLUMNS = ['epoch', 'loss_c', 'loss_p', 'loss_f']

EpochLoss = namedtuple('EpochLoss', 'epoch loss_c loss_p loss_f')
TrainResult = namedtuple('TrainResult', 'history steps')
StepLoss = namedtuple('StepLoss', 'loss_c loss_p loss_f')


@dataclass
class TrainConfig:
    """pairs (n) are split into batches (k) of n / k pairs for epochs (p) passes."""

    pairs: int = 1000
    batches: int = 10
    epochs: int = 200
    alpha: float = 0.5
    margin: float = 3.0
    lr: float = 1e-3
    seed: int = 0

    @property
    def batch_size(self):
        return self.pairs // self.batches

    def validate(self):
        check_alpha(self.alpha)
        if self.batches < 1 or self.pairs < 1 or self.epochs < 1:
            raise ConfigurationError('pairs, batches and epochs must be positive')
        if self.pairs % self.batches:
            raise ConfigurationError('%d pairs cannot be split into %d equal batches'
                                     % (self.pairs, self.batches))
        if self.batch_size < 2:
            raise ConfigurationError('batches of %d pair cannot be batch-normalised'
                                     % self.batch_size)
        if self.margin <= 0 or self.lr <= 0:
            raise ConfigurationError('margin and lr must be positive')
        if self.seed is None:
            raise ConfigurationError('a training seed is required')
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {key: value for key, value in values.items() if key in cls.__dataclass_fields__}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigurationError('unknown training settings: %s' % ', '.join(unknown))
        return cls(**known)


# pylint: disable=too-many-arguments,too-many-locals
def siamese_step(net, x_a, x_b, y_s, id_labels, alpha, margin, train=True):
    """Forward both branches, compute the joint loss and backpropagate.

    Gradients are added to the parameter grads; the caller zeroes them.

    Returns:
        StepLoss
    """
    feat_a, cache_a = net.extract(x_a, train)
    feat_b, cache_b = net.extract(x_b, train)
    scores_a, head_a = net.classify(feat_a, train)
    scores_b, head_b = net.classify(feat_b, train)

    loss_c, dfeat_a, dfeat_b = contrastive_loss_batch(feat_a, feat_b, y_s, margin)
    loss_p, dscores_a, dscores_b = identity_loss_batch(scores_a, scores_b, id_labels)
    loss_f = joint_loss(alpha, loss_c, loss_p)

    dfeat_a = alpha * dfeat_a + net.classify_backward((1 - alpha) * dscores_a, head_a)
    dfeat_b = alpha * dfeat_b + net.classify_backward((1 - alpha) * dscores_b, head_b)
    net.extract_backward(dfeat_a.astype(feat_a.dtype), cache_a)
    net.extract_backward(dfeat_b.astype(feat_b.dtype), cache_b)
    return StepLoss(loss_c, loss_p, loss_f)


def joint_objective(net, x_a, x_b, y_s, id_labels, alpha, margin, train=False):
    """Joint loss value only, no backward."""
    feat_a, _ = net.extract(x_a, train)
    feat_b, _ = net.extract(x_b, train)
    scores_a, _ = net.classify(feat_a, train)
    scores_b, _ = net.classify(feat_b, train)
    loss_c, _, _ = contrastive_loss_batch(feat_a, feat_b, y_s, margin)
    loss_p, _, _ = identity_loss_batch(scores_a, scores_b, id_labels)
    return joint_loss(alpha, loss_c, loss_p)


def _check_pairs(pairset, dataset, net, config):
    if len(pairset) != config.pairs:
        raise ConfigurationError('pair set holds %d pairs, training expects %d'
                                 % (len(pairset), config.pairs))
    idx_a, idx_b, y_s, id_labels = pairset.arrays()
    for indices in (idx_a, idx_b):
        if indices.size and (indices.min() < 0 or indices.max() >= dataset.num_samples):
            raise IntegrityError('pair indices exceed the %d samples of the dataset'
                                 % dataset.num_samples)
    if id_labels.size and id_labels.max() >= net.config.num_identities:
        raise LabelError('identity label %d exceeds the %d identities of the head'
                         % (id_labels.max(), net.config.num_identities))
    return idx_a, idx_b, y_s, id_labels


def train(net, pairset, dataset, config, normalizer=None, logger=None):
    """Train net in place on pairset.

    Args:
        net (RfbpNet): model to train.
        pairset (PairSet): n pairs of sample indices.
        dataset (SignalDataset): samples and labels the pair indices refer to.
        config (TrainConfig): schedule and loss weights.
        normalizer (Normalizer): applied to the samples first when given.
    Returns:
        TrainResult(history, steps) with one EpochLoss of batch means per epoch.
    Raises:
        NumericError: a loss or gradient turned non-finite; the message names
            the epoch and batch.
    """
    config.validate()
    logger = logger or get_logger('rfbpnet.trainer')
    idx_a, idx_b, y_s, id_labels = _check_pairs(pairset, dataset, net, config)
    dtype = net.parameters()[0].value.dtype
    samples = dataset.samples if normalizer is None else normalizer.apply(dataset.samples)
    samples = np.asarray(samples, dtype=dtype)

    rng = make_rng(config.seed, TRAIN_STREAM)
    optimizer = Adam(net.parameters(), lr=config.lr)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(config.pairs)
        totals = np.zeros(3)
        for batch in range(config.batches):
            chosen = order[batch * config.batch_size:(batch + 1) * config.batch_size]
            optimizer.zero_grad()
            try:
                step = siamese_step(net, samples[idx_a[chosen]], samples[idx_b[chosen]],
                                    y_s[chosen], id_labels[chosen], config.alpha, config.margin)
                if not np.all(np.isfinite(step)):
                    raise NumericError('non-finite loss %s' % (step,))
                optimizer.step()
            except NumericError as exception:
                raise NumericError('training diverged at epoch %d batch %d: %s'
                                   % (epoch, batch + 1, exception)) from exception
            totals += step
        means = totals / config.batches
        history.append(EpochLoss(epoch, *means.tolist()))
        logger.info('epoch %d/%d loss_c %.4f loss_p %.4f loss_f %.4f',
                    epoch, config.epochs, means[0], means[1], means[2])
    net.metadata = {'seed': config.seed, 'epochs': config.epochs,
                    'final_loss': history[-1]._asdict()}
    return TrainResult(history, optimizer.steps)


def history_to_csv(history):
    """Per-epoch losses as CSV text with header epoch,loss_c,loss_p,loss_f."""
    frame = pd.DataFrame([tuple(row) for row in history], columns=HISTORY_COLUMNS)
    return frame.to_csv(index=False, lineterminator='\n', float_format='%.9g')


def write_history(history, path):
    with open(path, 'w', encoding='utf-8') as stream:
        stream.write(history_to_csv(history))
