"""Small datasets and configurations shared by the unit tests."""

import numpy as np

from rfbpnet.config import ExperimentConfig
from rfbpnet.dataset_store import SignalDataset
from rfbpnet.rfbp_net import ExtractorConfig
from rfbpnet.signal_synth import SynthConfig, synth_dataset
from rfbpnet.trainer import TrainConfig


def tiny_synth_config(**overrides):
    values = {'num_users': 3, 'num_behaviors': 3, 'samples_per_cell': 4,
              'sample_shape': [2, 8, 8], 'noise_sigma': 0.1, 'seed': 0}
    values.update(overrides)
    return SynthConfig(**values)


def tiny_dataset(**overrides):
    return synth_dataset(tiny_synth_config(**overrides))


def tiny_extractor_config(**overrides):
    values = {'input_shape': [2, 8, 8], 'conv_channels': [2, 3, 4], 'fc1_width': 8,
              'feature_size': 4, 'head_width': 4, 'num_identities': 3}
    values.update(overrides)
    return ExtractorConfig(**values)


def label_dataset(identity, behavior, shape=(3,), seed=0):
    """Random samples carrying the given label columns."""
    identity = np.asarray(identity)
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal([identity.shape[0]] + list(shape))
    return SignalDataset(samples, identity, behavior, seed=seed)


def grid_labels(users, behaviors, per_cell):
    """identity, behavior columns ordered user, then behavior, then repeat."""
    identity = np.repeat(np.arange(users), behaviors * per_cell)
    behavior = np.tile(np.repeat(np.arange(behaviors), per_cell), users)
    return identity, behavior


def blobs(centers, per_class, spread=0.1, seed=0):
    """Gaussian blobs, one class per center: (x [n, d], y [n])."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    x = np.concatenate([center + spread * rng.standard_normal((per_class, centers.shape[1]))
                        for center in centers])
    y = np.repeat(np.arange(centers.shape[0]), per_class)
    return x, y


def tiny_experiment_config(out, **overrides):
    """A run small enough for unit tests: 24 pairs, one epoch, fast validators."""
    values = {'synth': tiny_synth_config(), 'extractor': tiny_extractor_config(),
              'train': TrainConfig(pairs=24, batches=3, epochs=1, alpha=0.7),
              'validators': ['knn', 'nb'], 'evaluator': 'knn', 'out': out}
    values.update(overrides)
    return ExperimentConfig(**values)
