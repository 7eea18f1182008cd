"""Parameter sweeps: one full run per value with shared seeds."""

import copy
import os
from collections import namedtuple
from dataclasses import dataclass, field
from typing import List

import pandas as pd

from rfbpnet.dataset_store import read_dataset, subset_dataset
from rfbpnet.experiment import Experiment
from rfbpnet.helper import WorkerPool
from rfbpnet.layers import ACTIVATIONS
from rfbpnet.pairing import build_pairs
from rfbpnet.signal_synth import synth_dataset
from rfbpnet.utils import ConfigurationError, RfbpError, get_logger

SWEEP_COLUMNS = ['value', 'id_acc', 'beh_acc', 'diff']
PARAMETER_TYPES = {'pairs': int, 'alpha': float, 'feature_size': int, 'activation': str,
                   'users': int}

SweepRow = namedtuple('SweepRow', 'value id_acc beh_acc diff')

LOGGER = get_logger('rfbpnet.sweep')


@dataclass
class SweepResult:
    parameter: str
    rows: List[SweepRow] = field(default_factory=list)
    failures: List[dict] = field(default_factory=list)

    def best(self):
        """The row with the largest absolute accuracy difference, first on ties."""
        if not self.rows:
            return None
        return max(self.rows, key=lambda row: abs(row.diff))

    def to_csv(self):
        frame = pd.DataFrame([tuple(row) for row in self.rows], columns=SWEEP_COLUMNS)
        return frame.to_csv(index=False, lineterminator='\n', float_format='%.6f')

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as stream:
            stream.write(self.to_csv())


def _check_parameter(parameter):
    if parameter not in PARAMETER_TYPES:
        raise ConfigurationError('cannot sweep %r, expected one of %s'
                                 % (parameter, ', '.join(PARAMETER_TYPES)))


def parse_values(parameter, texts):
    """Typed sweep values from command-line strings."""
    _check_parameter(parameter)
    try:
        return [PARAMETER_TYPES[parameter](text) for text in texts]
    except ValueError as exception:
        raise ConfigurationError('bad value for %s: %s' % (parameter, exception)) from exception


def _check_values(parameter, values):
    _check_parameter(parameter)
    if not values:
        raise ConfigurationError('a sweep needs at least one value')
    if parameter == 'activation':
        unknown = [value for value in values if value not in ACTIVATIONS]
        if unknown:
            raise ConfigurationError('unknown activations %s' % ', '.join(unknown))


def _configure(base, parameter, value):
    config = copy.deepcopy(base)
    config.out = os.path.join(base.out, '%s_%s' % (parameter, value))
    if parameter == 'pairs':
        config.train.pairs = value
    elif parameter == 'alpha':
        config.train.alpha = value
    elif parameter == 'feature_size':
        config.extractor.feature_size = value
    elif parameter == 'activation':
        config.extractor.final_activation = value
    return config


def source_dataset(config):
    if config.dataset is not None:
        return read_dataset(config.dataset)
    synth = copy.deepcopy(config.synth)
    synth.workers = config.workers
    return synth_dataset(synth)


def run_sweep(parameter, values, base_config, dataset=None, workers=1):
    """Run the workflow once per value and collect feature accuracies.

    The pairs sweep draws one pair set of the largest size and trains on
    nested prefixes of it. The users sweep keeps the first k identities.
    A failing value is logged and recorded in failures; the others still run.
    """
    _check_values(parameter, values)
    base_config.validate()
    dataset = dataset if dataset is not None else source_dataset(base_config)
    fundamental = None
    if parameter == 'pairs':
        fundamental = build_pairs(dataset, max(values), base_config.pair_seed,
                                  base_config.pair_balance)

    def run_one(value):
        try:
            config = _configure(base_config, parameter, value)
            if parameter == 'users' and value > dataset.num_identities:
                raise ConfigurationError('cannot keep %d of %d identities'
                                         % (value, dataset.num_identities))
            data = subset_dataset(dataset, range(value)) if parameter == 'users' else dataset
            experiment = Experiment(config, dataset=data, pairset=fundamental,
                                    audit_source=False).run()
        except RfbpError as exception:
            LOGGER.error('sweep %s=%s failed: %s', parameter, value, exception)
            return None, {'value': value, 'error': str(exception)}
        rows = experiment.summary['rows']
        id_acc, beh_acc = rows['identity']['rfbp_net'], rows['behavior']['rfbp_net']
        LOGGER.info('sweep %s=%s identity %.4f behavior %.4f', parameter, value, id_acc, beh_acc)
        return SweepRow(value, id_acc, beh_acc, id_acc - beh_acc), None

    result = SweepResult(parameter)
    with WorkerPool(workers) as pool:
        for value in values:
            pool.spawn(run_one, value)
        for row, failure in pool.waitall():
            if row is not None:
                result.rows.append(row)
            else:
                result.failures.append(failure)
    return result
