"""Stratified train/test evaluation of the audit classifiers.

Importing this module registers every classifier, so make_classifier knows
all the names below.
"""

from collections import namedtuple
from dataclasses import asdict, dataclass, field

import numpy as np

from rfbpnet.helper import WorkerPool
from rfbpnet.utils import ConfigurationError, get_logger, make_rng
# pylint: disable=unused-import
from rfbpnet.validators import cnn, decision_tree, knn, linear_svm, mlp, naive_bayes, random_guess
from rfbpnet.validators.abstract_classifier import CLASSIFIERS, make_classifier
from rfbpnet.validators.report import TASKS, EvalReport

SPLIT_STREAM = 51
DESIGNATED_EVALUATOR = 'mlp'
SOURCE_VALIDATORS = ['knn', 'nb', 'dt', 'svm', 'mlp', 'cnn']

LOGGER = get_logger('rfbpnet.validators.evaluation')

SubjectReport = namedtuple('SubjectReport',
                           'model per_subject mean_behavior_accuracy identity_accuracy')


@dataclass
class SplitSpec:
    train_fraction: float = 0.75
    seed: int = 0

    def validate(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError('train_fraction must lie in (0, 1), got %r'
                                     % self.train_fraction)
        if self.seed is None:
            raise ConfigurationError('a split seed is required')
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        unknown = sorted(set(values) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigurationError('unknown split settings: %s' % ', '.join(unknown))
        return cls(**values)


@dataclass
class ModelSpec:
    """A registered classifier name plus keyword parameters for it."""

    name: str
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, value):
        """Accepts a ModelSpec, a bare name or {'name': ..., other params}."""
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls(value)
        if isinstance(value, dict) and 'name' in value:
            params = {key: item for key, item in value.items() if key != 'name'}
            return cls(str(value['name']), params)
        raise ConfigurationError('cannot read a validator from %r' % (value,))

    def build(self, seed):
        if self.name not in CLASSIFIERS:
            raise ConfigurationError('unknown validator %r, expected one of %s'
                                     % (self.name, ', '.join(sorted(CLASSIFIERS))))
        params = dict(self.params)
        if CLASSIFIERS[self.name].SEEDED:
            params.setdefault('seed', seed)
        return make_classifier(self.name, **params)


def chance(num_classes):
    return 1.0 / num_classes


def split_indices(identity, behavior, split_spec):
    """Train and test indices, split separately inside every (identity, behavior) cell.

    A cell with at least two samples always contributes to both sides.
    """
    split_spec.validate()
    identity = np.asarray(identity, dtype=np.int64)
    behavior = np.asarray(behavior, dtype=np.int64)
    rng = make_rng(split_spec.seed, SPLIT_STREAM)
    cells = np.unique(np.stack([identity, behavior], axis=1), axis=0)
    train, test = [], []
    for user, action in cells:
        members = np.flatnonzero((identity == user) & (behavior == action))
        members = members[rng.permutation(members.shape[0])]
        count = int(round(members.shape[0] * split_spec.train_fraction))
        if members.shape[0] >= 2:
            count = min(max(count, 1), members.shape[0] - 1)
        train.append(members[:count])
        test.append(members[count:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def evaluate_split(samples, labels, train_index, test_index, task, model_spec, num_classes,
                   seed=0):
    """Fit on the train rows, report on the test rows."""
    model_spec = ModelSpec.parse(model_spec)
    labels = np.asarray(labels, dtype=np.int64)
    warnings = ['class %d is absent from the training split' % label
                for label in sorted(set(labels[test_index]) - set(labels[train_index]))]
    classifier = model_spec.build(seed)
    predictions = classifier.fit_predict(samples[train_index], labels[train_index],
                                         samples[test_index])
    report = EvalReport.build(task, model_spec.name, labels[test_index], predictions,
                              num_classes, warnings)
    for warning in warnings:
        LOGGER.warning('%s on %s: %s', model_spec.name, task, warning)
    LOGGER.info('%s %s accuracy %.4f on %d test samples', model_spec.name, task,
                report.accuracy, test_index.shape[0])
    return report.validate()


def evaluate(dataset, task, model_spec, split_spec=None):
    """EvalReport of one classifier on one label column of a SignalDataset.

    Vector classifiers see flattened samples; the split is stratified by
    (identity, behavior) whatever the task.
    """
    if task not in TASKS:
        raise ConfigurationError('unknown task %r, expected one of %s' % (task, ', '.join(TASKS)))
    split_spec = split_spec or SplitSpec()
    train_index, test_index = split_indices(dataset.identity, dataset.behavior, split_spec)
    num_classes = dataset.num_identities if task == 'identity' else dataset.num_behaviors
    return evaluate_split(dataset.samples, dataset.labels(task), train_index, test_index, task,
                          model_spec, num_classes, split_spec.seed)


def evaluate_per_subject(dataset, model_spec, split_spec=None):
    """Behavior recognition trained and tested inside each identity's own samples."""
    split_spec = split_spec or SplitSpec()
    model_spec = ModelSpec.parse(model_spec)
    per_subject = []
    for user in range(dataset.num_identities):
        members = np.flatnonzero(dataset.identity == user)
        if members.shape[0] == 0:
            continue
        subset = dataset.take(members)
        report = evaluate_split(subset.samples, subset.behavior,
                                *split_indices(subset.identity, subset.behavior, split_spec),
                                'behavior', model_spec, dataset.num_behaviors, split_spec.seed)
        per_subject.append(report.accuracy)
    identity = evaluate(dataset, 'identity', model_spec, split_spec)
    return SubjectReport(model_spec.name, per_subject, float(np.mean(per_subject)),
                         identity.accuracy)


def feature_quality(id_report, beh_report):
    """Identity accuracy minus behavior accuracy; higher means better privacy/utility."""
    return id_report.accuracy - beh_report.accuracy


def run_suite(dataset, model_specs, tasks=TASKS, split_spec=None, workers=1):
    """Reports for every (model, task), in model then task order."""
    split_spec = split_spec or SplitSpec()
    jobs = [(ModelSpec.parse(spec), task) for spec in model_specs for task in tasks]
    with WorkerPool(workers) as pool:
        for spec, task in jobs:
            pool.spawn(evaluate, dataset, task, spec, split_spec)
        return pool.waitall()
