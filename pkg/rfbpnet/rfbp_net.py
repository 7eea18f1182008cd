"""The Siamese feature extractor with its identity head.

Both branches of the Siamese pair run through the one RfbpNet instance, so
weight sharing is structural: there is a single set of Parameters and the
backward of each branch adds into the same gradient buffers.
"""

import copy
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np

from rfbpnet.dataset_store import SignalDataset
from rfbpnet.helper import map_ordered
from rfbpnet.layers import ACTIVATIONS, LayerSpec, Sequential
from rfbpnet.utils import ConfigurationError, DimensionError, get_logger, make_rng

FEATURE_SIZES = (32, 64, 128, 256, 512)
MODEL_STREAM = 21
EXTRACT_BATCH = 256


@dataclass
class ExtractorConfig:
    """Geometry of the extractor (conv stack + FC refinement) and the identity head."""

    input_shape: List[int] = field(default_factory=lambda: [2, 30, 49])
    conv_channels: List[int] = field(default_factory=lambda: [16, 32, 64])
    kernel_size: int = 3
    stride: int = 2
    padding: int = 1
    fc1_width: int = 256
    feature_size: int = 64
    final_activation: str = 'none'
    head_width: int = 64
    num_identities: int = 5
    head_final_sigmoid: bool = True

    def conv_specs(self):
        specs = []
        channels = self.input_shape[0]
        for out_channels in self.conv_channels:
            specs.append(LayerSpec('conv2d', channels, out_channels, self.kernel_size,
                                   self.stride, self.padding))
            specs.append(LayerSpec('batchnorm2d', out_channels))
            specs.append(LayerSpec('activation', activation='relu'))
            channels = out_channels
        specs.append(LayerSpec('flatten'))
        return specs

    def refine_specs(self, flat_size):
        return [LayerSpec('linear', flat_size, self.fc1_width),
                LayerSpec('activation', activation='sigmoid'),
                LayerSpec('linear', self.fc1_width, self.feature_size),
                LayerSpec('activation', activation=self.final_activation)]

    def head_specs(self):
        final = 'sigmoid' if self.head_final_sigmoid else 'none'
        return [LayerSpec('linear', self.feature_size, self.head_width),
                LayerSpec('activation', activation='sigmoid'),
                LayerSpec('linear', self.head_width, self.num_identities),
                LayerSpec('activation', activation=final)]

    def flat_size(self):
        """Width of the flattened conv output; validates the conv geometry on the way."""
        shape = tuple(self.input_shape)
        for spec in self.conv_specs():
            shape = spec.output_shape(shape)
        return shape[0]

    def validate(self):
        if len(self.input_shape) != 3:
            raise ConfigurationError('input_shape must be [C, H, W], got %s' % self.input_shape)
        if not self.conv_channels:
            raise ConfigurationError('at least one conv layer is required')
        if self.feature_size < 2:
            raise ConfigurationError('feature_size must be at least 2, got %d' % self.feature_size)
        if self.num_identities < 1:
            raise ConfigurationError('num_identities must be at least 1')
        if self.final_activation not in ACTIVATIONS:
            raise ConfigurationError('unknown final activation %r, expected one of %s'
                                     % (self.final_activation, ', '.join(ACTIVATIONS)))
        self.flat_size()
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {key: value for key, value in values.items() if key in cls.__dataclass_fields__}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigurationError('unknown extractor settings: %s' % ', '.join(unknown))
        return cls(**known)


class RfbpNet:
    """Shared-weight extractor (conv stack, then FC refinement) plus identity head."""

    def __init__(self, config, seed=0, dtype=np.float32):
        self.config = config.validate()
        self.logger = get_logger('rfbpnet.model')
        self.metadata = {}
        rng = make_rng(seed, MODEL_STREAM)
        self.conv_stack, flat_shape = Sequential.from_specs(
            config.conv_specs(), config.input_shape, 'extractor.conv', rng, dtype)
        self.refiner, _ = Sequential.from_specs(
            config.refine_specs(flat_shape[0]), flat_shape, 'extractor.fc', rng, dtype)
        self.head, _ = Sequential.from_specs(
            config.head_specs(), (config.feature_size,), 'head', rng, dtype)

    def parameters(self):
        return self.conv_stack.parameters() + self.refiner.parameters() + self.head.parameters()

    def extractor_parameters(self):
        return self.conv_stack.parameters() + self.refiner.parameters()

    def buffers(self):
        return self.conv_stack.buffers() + self.refiner.buffers() + self.head.buffers()

    def _check_input(self, x):
        if tuple(x.shape[1:]) != tuple(self.config.input_shape):
            raise DimensionError('samples of shape %s do not match the configured input %s'
                                 % (list(x.shape[1:]), self.config.input_shape))

    def extract(self, x, train=False):
        """Features [N, feature_size] of a batch [N, C, H, W]; returns (features, cache)."""
        self._check_input(x)
        hidden, conv_cache = self.conv_stack.forward(x, train)
        features, refine_cache = self.refiner.forward(hidden, train)
        return features, (conv_cache, refine_cache)

    def extract_backward(self, dfeatures, cache):
        conv_cache, refine_cache = cache
        dhidden = self.refiner.backward(dfeatures, refine_cache)
        return self.conv_stack.backward(dhidden, conv_cache)

    def classify(self, features, train=False):
        """Identity head scores [N, num_identities]; returns (scores, cache)."""
        return self.head.forward(features, train)

    def classify_backward(self, dscores, cache):
        return self.head.backward(dscores, cache)

    def forward_extract(self, sample):
        """Feature vector of a single sample, batch norm in eval mode."""
        sample = np.asarray(sample, dtype=self.parameters()[0].value.dtype)
        features, _ = self.extract(sample[None], train=False)
        return features[0]

    def extract_batches(self, samples, batch_size=EXTRACT_BATCH, workers=1):
        """Eval-mode features of every sample, in order."""
        samples = np.asarray(samples, dtype=self.parameters()[0].value.dtype)
        if samples.shape[0] == 0:
            return np.zeros((0, self.config.feature_size), dtype=samples.dtype)
        starts = range(0, samples.shape[0], batch_size)
        chunks = map_ordered(lambda start: self.extract(samples[start:start + batch_size])[0],
                             starts, workers)
        return np.concatenate(chunks, axis=0)

    def astype(self, dtype):
        """Deep copy of the net with every parameter and buffer cast to dtype."""
        clone = copy.deepcopy(self)
        for stack in (clone.conv_stack, clone.refiner, clone.head):
            stack.cast_(dtype)
        return clone

    def zero_grad(self):
        for param in self.parameters():
            param.zero_grad()


def extract_all(net, dataset, normalizer=None, workers=1):
    """Feature dataset of every sample with both label columns carried through."""
    samples = dataset.samples if normalizer is None else normalizer.apply(dataset.samples)
    features = net.extract_batches(samples, workers=workers)
    return SignalDataset(features, dataset.identity, dataset.behavior,
                         provenance={'source': 'extract_all',
                                     'feature_size': net.config.feature_size},
                         seed=dataset.seed)
