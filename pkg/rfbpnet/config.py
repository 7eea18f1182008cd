"""Experiment configuration: one JSON file, presets, and command-line overrides."""

import copy
import json
import os
from dataclasses import dataclass, field
from typing import List, Optional

from rfbpnet.pairing import BALANCES
from rfbpnet.rfbp_net import ExtractorConfig
from rfbpnet.signal_synth import SynthConfig
from rfbpnet.trainer import TrainConfig
from rfbpnet.utils import ConfigurationError
from rfbpnet.validators.evaluation import DESIGNATED_EVALUATOR, SOURCE_VALIDATORS, SplitSpec

DEFAULT_THRESHOLD = 0.8
DEFAULT_OUT = 'rfbpnet-out'

# Both presets follow the best settings reported for the two sensing setups;
# neither is the default.
PRESETS = {
    'rfid': {
        'synth': {'num_users': 5, 'num_behaviors': 10, 'sample_shape': [2, 30, 49]},
        'train': {'alpha': 0.7},
        'extractor': {'input_shape': [2, 30, 49], 'feature_size': 64, 'num_identities': 5},
    },
    'wifi': {
        'synth': {'num_users': 10, 'num_behaviors': 10, 'sample_shape': [9, 56, 10]},
        'train': {'alpha': 0.8},
        'extractor': {'input_shape': [9, 56, 10], 'feature_size': 128, 'num_identities': 10},
    },
}

# flag name -> (section, field); seed is handled separately
OVERRIDES = {
    'alpha': ('train', 'alpha'),
    'pairs': ('train', 'pairs'),
    'batches': ('train', 'batches'),
    'epochs': ('train', 'epochs'),
    'feature_size': ('extractor', 'feature_size'),
    'activation': ('extractor', 'final_activation'),
}


@dataclass
class ExperimentConfig:
    """Everything one run needs.

    With dataset None the source data is synthesised from synth.
    """

    # pylint: disable=too-many-instance-attributes
    dataset: Optional[str] = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    pair_balance: str = 'none'
    pair_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    validators: List = field(default_factory=lambda: list(SOURCE_VALIDATORS))
    evaluator: str = DESIGNATED_EVALUATOR
    threshold: float = DEFAULT_THRESHOLD
    split: SplitSpec = field(default_factory=SplitSpec)
    normalize: bool = True
    out: str = DEFAULT_OUT
    workers: int = 1

    SECTIONS = {'synth': SynthConfig, 'train': TrainConfig, 'extractor': ExtractorConfig,
                'split': SplitSpec}

    def validate(self):
        self.train.validate()
        self.split.validate()
        if self.dataset is None:
            self.synth.validate()
        elif not os.path.isdir(self.dataset):
            raise ConfigurationError('dataset directory %s does not exist' % self.dataset)
        if self.pair_balance not in BALANCES:
            raise ConfigurationError('pair_balance must be one of %s, got %r'
                                     % (', '.join(BALANCES), self.pair_balance))
        if self.pair_seed is None:
            raise ConfigurationError('a pairing seed is required')
        if not 0.0 < self.threshold < 1.0:
            raise ConfigurationError('threshold must lie in (0, 1), got %r' % self.threshold)
        if not self.validators:
            raise ConfigurationError('at least one source validator is required')
        if self.workers < 1:
            raise ConfigurationError('workers must be at least 1')
        return self

    def set_seed(self, seed):
        """One seed for every random stream of the run."""
        self.synth.seed = seed
        self.pair_seed = seed
        self.train.seed = seed
        self.split.seed = seed

    def to_dict(self):
        return {'dataset': self.dataset, 'synth': self.synth.to_dict(),
                'pair_balance': self.pair_balance, 'pair_seed': self.pair_seed,
                'train': self.train.to_dict(), 'extractor': self.extractor.to_dict(),
                'validators': list(self.validators), 'evaluator': self.evaluator,
                'threshold': self.threshold, 'split': self.split.to_dict(),
                'normalize': self.normalize, 'out': self.out, 'workers': self.workers}

    @classmethod
    def from_dict(cls, values, base=None):
        """Overlay values on base (defaults when None); sections merge field by field."""
        if not isinstance(values, dict):
            raise ConfigurationError('configuration must be a JSON object')
        merged = copy.deepcopy(base) if base is not None else cls()
        for key, value in values.items():
            if key in cls.SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigurationError('section %s must be an object' % key)
                section = dict(getattr(merged, key).to_dict(), **value)
                setattr(merged, key, cls.SECTIONS[key].from_dict(section))
            elif key in cls.__dataclass_fields__:
                setattr(merged, key, value)
            else:
                raise ConfigurationError('unknown configuration key %r' % key)
        return merged


def preset(name):
    if name not in PRESETS:
        raise ConfigurationError('unknown preset %r, expected one of %s'
                                 % (name, ', '.join(sorted(PRESETS))))
    return ExperimentConfig.from_dict(PRESETS[name])


def load_config(path, base=None):
    try:
        with open(path, encoding='utf-8') as stream:
            values = json.load(stream)
    except (OSError, json.JSONDecodeError) as exception:
        raise ConfigurationError('cannot read configuration %s: %s' % (path, exception)) \
            from exception
    return ExperimentConfig.from_dict(values, base)


def apply_overrides(config, overrides):
    """Set the fields named by command-line flags; None means the flag was not given."""
    config = copy.deepcopy(config)
    for flag, value in overrides.items():
        if value is None:
            continue
        if flag == 'seed':
            config.set_seed(value)
        elif flag == 'out':
            config.out = value
        elif flag in OVERRIDES:
            section, name = OVERRIDES[flag]
            setattr(getattr(config, section), name, value)
        else:
            raise ConfigurationError('no configuration field for flag --%s'
                                     % flag.replace('_', '-'))
    return config


def build_config(config_path=None, preset_name=None, overrides=None):
    """Defaults, then preset, then the JSON file, then flags."""
    config = preset(preset_name) if preset_name else ExperimentConfig()
    if config_path:
        config = load_config(config_path, config)
    return apply_overrides(config, overrides or {})
