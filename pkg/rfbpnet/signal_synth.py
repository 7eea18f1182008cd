"""Synthetic RF-like datasets with separately controllable identity and behavior content.

A sample is [C, H, W]: axis 1 is time, axis 2 runs over the tags of a flat
tag array. The first C - C // 2 channels start out as received-strength
channels carrying the user's static signature, and the remaining C // 2 as
phase channels carrying the wrapped phase response to a hand trajectory.
A fixed well-conditioned channel mixing then entangles the two.

This is a test-bench model, not a physical simulation.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np

from rfbpnet.dataset_store import SignalDataset
from rfbpnet.helper import WorkerPool
from rfbpnet.utils import (ConfigurationError, InvariantViolationError, ParameterError, get_logger,
                           make_rng)

TWO_PI = 2.0 * math.pi
WAVELENGTH = 0.325
TAG_SPACING = 0.1
HAND_HEIGHT = 0.15
SIGNATURE_JITTER = 0.02
PATH_JITTER = 0.02
MAX_CONDITION = 10.0

PROFILE_STREAM = 11
BEHAVIOR_STREAM = 12
CHANNEL_STREAM = 13
SAMPLE_STREAM = 14

LOGGER = get_logger('rfbpnet.signal_synth')


def split_channels(channels):
    """(received-strength channels, phase channels) for a sample with this many channels."""
    if channels < 2:
        raise ConfigurationError('samples need at least 2 channels, got %d' % channels)
    return channels - channels // 2, channels // 2


@dataclass
class IdentityProfile:
    user_id: int
    signature: np.ndarray
    impedance_scale: float


@dataclass
class BehaviorTemplate:
    """A hand path over the tag array and the hand-to-tag distances it produces.

    trajectory is [T, num_tags] in meters.
    """

    behavior_id: int
    path: np.ndarray
    trajectory: np.ndarray

    @property
    def duration(self):
        return self.trajectory.shape[0]


@dataclass
class ChannelModel:
    mixing: np.ndarray
    multipath_gains: np.ndarray
    wavelength: float = WAVELENGTH
    initial_phase: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ParameterError('wavelength must be positive, got %r' % self.wavelength)
        if self.mixing.ndim != 2 or self.mixing.shape[0] != self.mixing.shape[1]:
            raise ConfigurationError('mixing must be square, got shape %s' % (self.mixing.shape,))
        condition = np.linalg.cond(self.mixing)
        if not condition <= MAX_CONDITION:
            raise InvariantViolationError('mixing condition number %.3g exceeds %.3g'
                                          % (condition, MAX_CONDITION))
        if np.any(self.initial_phase < 0) or np.any(self.initial_phase >= TWO_PI):
            raise ParameterError('initial phases must lie in [0, 2*pi)')

    def apply(self, components):
        """Mix [C, H, W] components across the channel axis."""
        mixed = np.tensordot(self.mixing, components, axes=([1], [0]))
        return mixed * self.multipath_gains.reshape(-1, 1, 1)


@dataclass
class SynthConfig:
    num_users: int = 5
    num_behaviors: int = 10
    samples_per_cell: int = 80
    sample_shape: List[int] = field(default_factory=lambda: [2, 30, 49])
    noise_sigma: float = 0.2
    identity_gain: float = 1.0
    behavior_gain: float = 0.5
    seed: int = 0
    workers: int = 1

    def validate(self):
        if self.num_users < 1 or self.num_behaviors < 1:
            raise ConfigurationError('need at least one user and one behavior')
        if self.samples_per_cell < 1:
            raise ConfigurationError('samples_per_cell must be at least 1, got %d'
                                     % self.samples_per_cell)
        if len(self.sample_shape) != 3 or any(dim < 1 for dim in self.sample_shape):
            raise ConfigurationError('sample_shape must be [C, H, W], got %s' % self.sample_shape)
        split_channels(self.sample_shape[0])
        if self.noise_sigma < 0 or self.identity_gain < 0 or self.behavior_gain < 0:
            raise ConfigurationError('noise_sigma and gains must be non-negative')
        if self.seed is None:
            raise ConfigurationError('a seed is required')
        return self

    @property
    def num_samples(self):
        return self.num_users * self.num_behaviors * self.samples_per_cell

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {key: value for key, value in values.items() if key in cls.__dataclass_fields__}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigurationError('unknown synth settings: %s' % ', '.join(unknown))
        return cls(**known)


def gen_phase_series(trajectory, wavelength, initial_phase):
    """(2 * pi * 2d / wavelength + initial_phase) mod 2 * pi, every value in [0, 2 * pi).

    Raises:
        ParameterError: wavelength <= 0.
    """
    if wavelength <= 0:
        raise ParameterError('wavelength must be positive, got %r' % wavelength)
    phase = np.mod(TWO_PI * 2.0 * np.asarray(trajectory, dtype=np.float64) / wavelength
                   + initial_phase, TWO_PI)
    return np.where(phase >= TWO_PI, 0.0, phase)


def tag_positions(num_tags):
    """Tags on a square-ish grid in the z = 0 plane, TAG_SPACING apart."""
    columns = int(math.ceil(math.sqrt(num_tags)))
    index = np.arange(num_tags)
    return np.stack([(index % columns) * TAG_SPACING, (index // columns) * TAG_SPACING], axis=1)


def hand_distances(path, tags):
    """Distances [T, num_tags] from a hand path [T, 2] at HAND_HEIGHT to every tag."""
    planar = path[:, None, :] - tags[None, :, :]
    return np.sqrt((planar ** 2).sum(axis=2) + HAND_HEIGHT ** 2)


def make_profile(user_id, config):
    rss_channels, _ = split_channels(config.sample_shape[0])
    rng = make_rng(config.seed, PROFILE_STREAM, user_id)
    pattern = rng.uniform(-1.0, 1.0, size=(rss_channels, 1, config.sample_shape[2]))
    return IdentityProfile(user_id, pattern, float(rng.uniform(0.6, 1.4)))


def make_behavior(behavior_id, config):
    """A smooth random hand path over the tag array, sampled at H time steps."""
    duration, num_tags = config.sample_shape[1], config.sample_shape[2]
    tags = tag_positions(num_tags)
    center = tags.mean(axis=0)
    rng = make_rng(config.seed, BEHAVIOR_STREAM, behavior_id)
    steps = np.linspace(0.0, 1.0, duration)[:, None]
    amplitude = rng.uniform(0.05, 0.25, size=(2, 2))
    frequency = rng.uniform(0.5, 2.0, size=(2, 2))
    offset = rng.uniform(0.0, TWO_PI, size=(2, 2))
    path = center + sum(amplitude[k] * np.sin(TWO_PI * frequency[k] * steps + offset[k])
                        for k in range(2))
    return BehaviorTemplate(behavior_id, path, hand_distances(path, tags))


def make_channel(config):
    """Seeded random rotation scaled by singular values in [0.8, 1.25]."""
    channels = config.sample_shape[0]
    _, phase_channels = split_channels(channels)
    rng = make_rng(config.seed, CHANNEL_STREAM)
    rotation, _ = np.linalg.qr(rng.standard_normal((channels, channels)))
    mixing = rotation * rng.uniform(0.8, 1.25, size=channels)
    return ChannelModel(mixing=mixing,
                        multipath_gains=rng.uniform(0.8, 1.2, size=channels),
                        wavelength=WAVELENGTH,
                        initial_phase=rng.uniform(0.0, TWO_PI, size=phase_channels))


# pylint: disable=too-many-arguments,too-many-locals
def synth_sample(profile, template, channel, noise_sigma, rng,
                 identity_gain=1.0, behavior_gain=1.0, tags=None):
    """One sample: mix(identity component, behavior component) + noise.

    With noise_sigma == 0 the sample is fully determined by the profile,
    template and channel; otherwise the signature gets a 2% multiplicative
    jitter and the hand path a small offset before the Gaussian noise.
    """
    rss_channels = profile.signature.shape[0]
    phase_channels = channel.initial_phase.shape[0]
    duration, num_tags = template.trajectory.shape

    signature = profile.signature * profile.impedance_scale
    trajectory = template.trajectory
    if noise_sigma > 0:
        signature = signature * (1.0 + SIGNATURE_JITTER * rng.standard_normal(signature.shape))
        if tags is None:
            tags = tag_positions(num_tags)
        path = template.path + PATH_JITTER * noise_sigma * rng.standard_normal(2)
        trajectory = hand_distances(path, tags)

    components = np.empty((rss_channels + phase_channels, duration, num_tags))
    components[:rss_channels] = identity_gain * np.broadcast_to(signature,
                                                                (rss_channels, duration, num_tags))
    for index in range(phase_channels):
        phase = gen_phase_series(trajectory, channel.wavelength, channel.initial_phase[index])
        components[rss_channels + index] = behavior_gain * phase

    sample = channel.apply(components)
    if noise_sigma > 0:
        sample = sample + rng.normal(0.0, noise_sigma, size=sample.shape)
    return sample.astype(np.float32)


def cell_order(config):
    """(user, behavior) of every sample index: user, then behavior, then repeat."""
    users = np.repeat(np.arange(config.num_users), config.num_behaviors * config.samples_per_cell)
    behaviors = np.tile(np.repeat(np.arange(config.num_behaviors), config.samples_per_cell),
                        config.num_users)
    return users, behaviors


def _check_distinct(arrays, what):
    flat = [np.asarray(array, dtype=np.float64).ravel() for array in arrays]
    for first in range(len(flat)):
        for second in range(first + 1, len(flat)):
            if not np.linalg.norm(flat[first] - flat[second]) > 0:
                raise InvariantViolationError('%s %d and %d are identical' % (what, first, second))


def synth_dataset(config):
    """Generate num_users x num_behaviors x samples_per_cell labelled samples.

    Each sample draws its randomness from (seed, sample index), so the result
    does not depend on config.workers.
    """
    config.validate()
    profiles = [make_profile(user, config) for user in range(config.num_users)]
    templates = [make_behavior(behavior, config) for behavior in range(config.num_behaviors)]
    _check_distinct([p.signature * p.impedance_scale for p in profiles], 'user signatures')
    _check_distinct([t.trajectory for t in templates], 'behavior trajectories')
    channel = make_channel(config)
    tags = tag_positions(config.sample_shape[2])
    users, behaviors = cell_order(config)

    def generate(index):
        rng = make_rng(config.seed, SAMPLE_STREAM, index)
        return synth_sample(profiles[users[index]], templates[behaviors[index]], channel,
                            config.noise_sigma, rng, config.identity_gain, config.behavior_gain,
                            tags)

    with WorkerPool(config.workers) as pool:
        for index in range(config.num_samples):
            pool.spawn(generate, index)
        samples = pool.waitall()

    stacked = np.stack(samples) if samples else np.zeros([0] + list(config.sample_shape))
    recorded = config.to_dict()
    del recorded['workers']
    LOGGER.info('synthesised %d samples of shape %s (%d users x %d behaviors)',
                config.num_samples, config.sample_shape, config.num_users, config.num_behaviors)
    return SignalDataset(stacked, users, behaviors,
                         provenance={'source': 'signal_synth', 'config': recorded},
                         seed=config.seed)
